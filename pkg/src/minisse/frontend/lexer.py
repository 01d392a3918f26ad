import re
from dataclasses import dataclass

from ..errors import MiniCSyntaxError, UnsupportedError

KEYWORDS = {"int", "char", "void", "if", "else", "while", "return", "NULL", "extern"}
UNSUPPORTED_KEYWORDS = {
    "for", "do", "break", "continue", "switch", "case", "goto", "struct",
    "union", "typedef", "float", "double", "long", "short", "unsigned",
    "signed", "sizeof", "static", "const",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<char>'(?:\\.|[^\\'])')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\+\+|--|\+=|-=|\*=|&&|\|\||==|!=|<=|>=|[-+*/%<>=!&|^~?:;,(){}\[\]])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": 10, "t": 9, "0": 0, "\\": 92, "'": 39, "r": 13}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'kw' | 'op' | 'eof'
    text: str
    line: int
    col: int
    value: int = 0


def tokenize(source: str):
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            if source.startswith("/*", pos):
                raise MiniCSyntaxError("unterminated comment", line, col)
            raise MiniCSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            nls = text.count("\n")
            if nls:
                line += nls
                line_start = pos + text.rfind("\n") + 1
        elif kind in ("ws", "lcomment"):
            pass
        elif kind == "num":
            tokens.append(Token("num", text, line, col, int(text)))
        elif kind == "char":
            body = text[1:-1]
            if body.startswith("\\"):
                if body[1] not in _ESCAPES:
                    raise MiniCSyntaxError(f"unknown escape {body!r}", line, col)
                value = _ESCAPES[body[1]]
            else:
                value = ord(body)
            tokens.append(Token("char", text, line, col, value))
        elif kind == "ident":
            if text in UNSUPPORTED_KEYWORDS:
                raise UnsupportedError(f"'{text}' is not part of MiniC", line, col)
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        else:
            if text in ("/", "%"):
                raise UnsupportedError("division is not part of MiniC", line, col)
            if text in ("^", "~", "?", ":", "|", "*="):
                raise UnsupportedError(f"operator '{text}' is not part of MiniC", line, col)
            tokens.append(Token("op", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens
