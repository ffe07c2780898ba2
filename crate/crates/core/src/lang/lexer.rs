//! Indentation-aware lexer for the restricted Python-like surface syntax.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Canonical texts carried by the structural token kinds.
pub const INDENT_TEXT: &str = "<INDENT>";
pub const DEDENT_TEXT: &str = "<DEDENT>";
pub const NEWLINE_TEXT: &str = "<NEWLINE>";

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

// Longest first so that the scan below is a longest match.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "->", "<<", ">>", "+", "-", "*", "/", "%", "<", ">", "=", "&", "|",
    "^", "~", "@",
];

const PUNCT: &[char] = &['(', ')', '[', ']', '{', '}', ',', ':', '.', ';'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    String,
    Operator,
    Punct,
    Indent,
    Dedent,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the token start.
    pub line: usize,
    /// 1-based column of the token start.
    pub col: usize,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>, line: usize, col: usize) -> Self {
        Self { kind, text: text.into(), line, col }
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        (self.kind == TokenKind::Operator || self.kind == TokenKind::Punct) && self.text == text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {:?}", self.kind, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("lex error at {line}:{col}: {message}")]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Tokenizes `source`. Comments and blank lines are dropped, every logical
/// line ends with a `Newline`, and indentation changes produce
/// `Indent`/`Dedent` tokens.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer { lenient: false }.run(source)
}

/// Like [`tokenize`] but never fails: illegal characters are skipped,
/// unterminated strings run to the end of the line, and inconsistent
/// dedents snap to the nearest enclosing level.
pub fn tokenize_lenient(source: &str) -> Vec<Token> {
    Lexer { lenient: true }
        .run(source)
        .expect("lenient lexing is infallible")
}

struct Lexer {
    lenient: bool,
}

impl Lexer {
    fn run(&self, source: &str) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        let mut indents: Vec<usize> = vec![0];
        let mut last_line = 0;

        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let chars: Vec<char> = raw.chars().collect();

            let mut width = 0usize;
            let mut pos = 0usize;
            while pos < chars.len() {
                match chars[pos] {
                    ' ' => width += 1,
                    '\t' => width = (width / 8 + 1) * 8,
                    '\x0c' => width = 0,
                    _ => break,
                }
                pos += 1;
            }
            if pos == chars.len() || chars[pos] == '#' || chars[pos] == '\r' && pos + 1 == chars.len() {
                continue;
            }

            let top = *indents.last().unwrap();
            if width > top {
                indents.push(width);
                tokens.push(Token::new(TokenKind::Indent, INDENT_TEXT, line_no, 1));
            } else if width < top {
                while *indents.last().unwrap() > width {
                    indents.pop();
                    tokens.push(Token::new(TokenKind::Dedent, DEDENT_TEXT, line_no, 1));
                }
                if *indents.last().unwrap() != width {
                    if !self.lenient {
                        return Err(LexError {
                            line: line_no,
                            col: pos + 1,
                            message: "unindent does not match any outer indentation level"
                                .to_string(),
                        });
                    }
                    indents.push(width);
                    tokens.push(Token::new(TokenKind::Indent, INDENT_TEXT, line_no, 1));
                }
            }

            self.lex_line(&chars, pos, line_no, &mut tokens)?;
            tokens.push(Token::new(TokenKind::Newline, NEWLINE_TEXT, line_no, chars.len() + 1));
        }

        while indents.len() > 1 {
            indents.pop();
            tokens.push(Token::new(TokenKind::Dedent, DEDENT_TEXT, last_line + 1, 1));
        }
        Ok(tokens)
    }

    fn lex_line(
        &self,
        chars: &[char],
        mut pos: usize,
        line: usize,
        out: &mut Vec<Token>,
    ) -> Result<(), LexError> {
        while pos < chars.len() {
            let c = chars[pos];
            let col = pos + 1;
            if c == ' ' || c == '\t' || c == '\r' {
                pos += 1;
            } else if c == '#' {
                break;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = pos;
                while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                    pos += 1;
                }
                let word: String = chars[start..pos].iter().collect();
                let kind = if is_keyword(&word) { TokenKind::Keyword } else { TokenKind::Identifier };
                out.push(Token::new(kind, word, line, col));
            } else if c.is_ascii_digit() || (c == '.' && chars.get(pos + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = pos;
                while pos < chars.len() && (chars[pos].is_ascii_digit() || chars[pos] == '_') {
                    pos += 1;
                }
                if pos < chars.len() && chars[pos] == '.' {
                    pos += 1;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
                if pos < chars.len() && (chars[pos] == 'e' || chars[pos] == 'E') {
                    let mut look = pos + 1;
                    if look < chars.len() && (chars[look] == '+' || chars[look] == '-') {
                        look += 1;
                    }
                    if look < chars.len() && chars[look].is_ascii_digit() {
                        pos = look;
                        while pos < chars.len() && chars[pos].is_ascii_digit() {
                            pos += 1;
                        }
                    }
                }
                let text: String = chars[start..pos].iter().collect();
                out.push(Token::new(TokenKind::Number, text, line, col));
            } else if c == '"' || c == '\'' {
                let start = pos;
                pos += 1;
                let mut closed = false;
                while pos < chars.len() {
                    if chars[pos] == '\\' {
                        pos += 2;
                        continue;
                    }
                    if chars[pos] == c {
                        pos += 1;
                        closed = true;
                        break;
                    }
                    pos += 1;
                }
                let pos_end = pos.min(chars.len());
                if !closed && !self.lenient {
                    return Err(LexError { line, col, message: "unterminated string literal".into() });
                }
                let text: String = chars[start..pos_end].iter().collect();
                out.push(Token::new(TokenKind::String, text, line, col));
                pos = pos_end;
            } else if PUNCT.contains(&c) {
                out.push(Token::new(TokenKind::Punct, c.to_string(), line, col));
                pos += 1;
            } else if let Some(op) = OPERATORS.iter().find(|op| starts_with(chars, pos, op)) {
                out.push(Token::new(TokenKind::Operator, *op, line, col));
                pos += op.len();
            } else {
                if !self.lenient {
                    return Err(LexError { line, col, message: format!("illegal character {c:?}") });
                }
                pos += 1;
            }
        }
        Ok(())
    }
}

fn starts_with(chars: &[char], pos: usize, pat: &str) -> bool {
    let mut i = pos;
    for p in pat.chars() {
        if chars.get(i) != Some(&p) {
            return false;
        }
        i += 1;
    }
    true
}

/// Renders a token stream back into source text: one logical line per
/// `Newline`, four spaces per indentation level, tokens separated by a
/// single space.
pub fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut level = 0usize;
    let mut line: Vec<&str> = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => level = level.saturating_sub(1),
            TokenKind::Newline => {
                if !line.is_empty() {
                    out.push_str(&" ".repeat(4 * level));
                    out.push_str(&line.join(" "));
                    out.push('\n');
                    line.clear();
                }
            }
            _ => line.push(&tok.text),
        }
    }
    if !line.is_empty() {
        out.push_str(&" ".repeat(4 * level));
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_texts(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn single_assignment() {
        use TokenKind::*;
        assert_eq!(
            kinds_texts("x = 1"),
            vec![
                (Identifier, "x".into()),
                (Operator, "=".into()),
                (Number, "1".into()),
                (Newline, NEWLINE_TEXT.into())
            ]
        );
    }

    #[test]
    fn import_line() {
        use TokenKind::*;
        assert_eq!(
            kinds_texts("import math"),
            vec![(Keyword, "import".into()), (Identifier, "math".into()), (Newline, NEWLINE_TEXT.into())]
        );
    }

    #[test]
    fn block_structure() {
        let toks = tokenize("for i in range(3):\n    print(i)\n").unwrap();
        let for_at = toks.iter().position(|t| t.is_keyword("for")).unwrap();
        let indent_at = toks.iter().position(|t| t.kind == TokenKind::Indent).unwrap();
        let print_at = toks.iter().position(|t| t.text == "print").unwrap();
        let dedent_at = toks.iter().position(|t| t.kind == TokenKind::Dedent).unwrap();
        assert!(for_at < indent_at && indent_at < print_at && print_at < dedent_at);
        assert_eq!(toks[print_at].kind, TokenKind::Identifier);
    }

    #[test]
    fn comments_and_blank_lines_dropped() {
        let a = tokenize("x = 1\n\n# note\ny = 2  # trailing\n").unwrap();
        let b = tokenize("x = 1\ny = 2\n").unwrap();
        let strip = |v: Vec<Token>| v.into_iter().map(|t| (t.kind, t.text)).collect::<Vec<_>>();
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn longest_match_operators_and_strings() {
        let toks = kinds_texts("a += 'it''s'\nb = c ** 2 // 3 != 4");
        let texts: Vec<&str> = toks.iter().map(|(_, t)| t.as_str()).collect();
        assert!(texts.contains(&"+="));
        assert!(texts.contains(&"'it'"));
        assert!(texts.contains(&"**"));
        assert!(texts.contains(&"//"));
        assert!(texts.contains(&"!="));
    }

    #[test]
    fn printx_is_an_identifier_not_print() {
        let toks = tokenize("printx = 1").unwrap();
        assert_eq!(toks[0].text, "printx");
    }

    #[test]
    fn unterminated_string_reports_position() {
        let err = tokenize("x = 1\ny = 'abc").unwrap_err();
        assert_eq!((err.line, err.col), (2, 5));
    }

    #[test]
    fn illegal_character_reports_position() {
        let err = tokenize("x = $").unwrap_err();
        assert_eq!((err.line, err.col), (1, 5));
        assert!(tokenize_lenient("x = $").iter().any(|t| t.text == "x"));
    }

    #[test]
    fn inconsistent_dedent_is_an_error() {
        let err = tokenize("if x:\n    y = 1\n  z = 2\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn render_then_tokenize_is_stable() {
        let src = "import math\ndef f(a, b):\n    if a > b:\n        return a\n    return b\nprint(f(1, 2))\n";
        let toks = tokenize(src).unwrap();
        let again = tokenize(&render(&toks)).unwrap();
        let strip = |v: &[Token]| v.iter().map(|t| (t.kind, t.text.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&toks), strip(&again));
    }
}
