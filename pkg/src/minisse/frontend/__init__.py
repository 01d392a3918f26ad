"""MiniC lexer, parser, type checker, CFG builder and concrete interpreter."""
