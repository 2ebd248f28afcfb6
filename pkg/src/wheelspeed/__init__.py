"""Neural virtual wheel-speed sensor laboratory."""
