use crate::error::{Span, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Unquoted identifier or keyword.
    Word(String),
    /// `"identifier"`
    QuotedIdent(String),
    /// `'text'`
    String(String),
    Number(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Semicolon,
    /// `{{`
    OpenFn,
    /// `}}`
    CloseFn,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Concat,
    Eq,
    EqEq,
    NotEq,
    LtGt,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

pub fn syntax_error(text: &str, start: usize, end: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        message: message.into(),
        span: Span::locate(text, start, end),
    }
}

/// Splits query text into tokens, skipping whitespace and comments.
/// `{{` and `}}` inside string literals are ordinary characters.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = |kind| (kind, 1usize);
        let (kind, len) = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                match text[i + 2..].find("*/") {
                    Some(off) => i += off + 4,
                    None => return Err(syntax_error(text, i, text.len(), "unterminated comment")),
                }
                continue;
            }
            b'\'' => {
                let (s, next) = read_quoted(text, i, '\'')
                    .ok_or_else(|| syntax_error(text, i, text.len(), "unterminated string literal"))?;
                tokens.push(Token {
                    kind: TokenKind::String(s),
                    start,
                    end: next,
                });
                i = next;
                continue;
            }
            b'"' => {
                let (s, next) = read_quoted(text, i, '"').ok_or_else(|| {
                    syntax_error(text, i, text.len(), "unterminated quoted identifier")
                })?;
                tokens.push(Token {
                    kind: TokenKind::QuotedIdent(s),
                    start,
                    end: next,
                });
                i = next;
                continue;
            }
            b'0'..=b'9' => {
                let len = number_len(&bytes[i..]);
                (TokenKind::Number(text[i..i + len].to_string()), len)
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let len = number_len(&bytes[i..]);
                (TokenKind::Number(text[i..i + len].to_string()), len)
            }
            b'{' if bytes.get(i + 1) == Some(&b'{') => (TokenKind::OpenFn, 2),
            b'}' if bytes.get(i + 1) == Some(&b'}') => (TokenKind::CloseFn, 2),
            b',' => single(TokenKind::Comma),
            b'.' => single(TokenKind::Dot),
            b'(' => single(TokenKind::LParen),
            b')' => single(TokenKind::RParen),
            b';' => single(TokenKind::Semicolon),
            b'*' => single(TokenKind::Star),
            b'+' => single(TokenKind::Plus),
            b'-' => single(TokenKind::Minus),
            b'/' => single(TokenKind::Slash),
            b'%' => single(TokenKind::Percent),
            b'|' if bytes.get(i + 1) == Some(&b'|') => (TokenKind::Concat, 2),
            b'=' if bytes.get(i + 1) == Some(&b'=') => (TokenKind::EqEq, 2),
            b'=' => single(TokenKind::Eq),
            b'!' if bytes.get(i + 1) == Some(&b'=') => (TokenKind::NotEq, 2),
            b'<' if bytes.get(i + 1) == Some(&b'>') => (TokenKind::LtGt, 2),
            b'<' if bytes.get(i + 1) == Some(&b'=') => (TokenKind::LtEq, 2),
            b'<' => single(TokenKind::Lt),
            b'>' if bytes.get(i + 1) == Some(&b'=') => (TokenKind::GtEq, 2),
            b'>' => single(TokenKind::Gt),
            _ => {
                let ch = text[i..].chars().next().unwrap_or('\0');
                if ch.is_alphabetic() || ch == '_' {
                    let len = text[i..]
                        .char_indices()
                        .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '$'))
                        .map_or(text.len() - i, |(off, _)| off);
                    (TokenKind::Word(text[i..i + len].to_string()), len)
                } else {
                    return Err(syntax_error(
                        text,
                        i,
                        i + ch.len_utf8(),
                        format!("unexpected character `{ch}`"),
                    ));
                }
            }
        };
        tokens.push(Token {
            kind,
            start,
            end: start + len,
        });
        i = start + len;
    }
    Ok(tokens)
}

/// Reads a quoted run starting at `start` (which holds the quote); doubled
/// quotes escape. Returns the unescaped contents and the index after the
/// closing quote.
pub(crate) fn read_quoted(text: &str, start: usize, quote: char) -> Option<(String, usize)> {
    let mut out = String::new();
    let mut chars = text[start + 1..].char_indices().peekable();
    while let Some((off, c)) = chars.next() {
        if c == quote {
            if chars.peek().map(|(_, n)| *n) == Some(quote) {
                out.push(quote);
                chars.next();
            } else {
                return Some((out, start + 1 + off + 1));
            }
        } else {
            out.push(c);
        }
    }
    None
}

fn number_len(bytes: &[u8]) -> usize {
    let mut i = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokenKind> {
        tokenize(s).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn braces_inside_strings_are_inert() {
        assert_eq!(
            kinds("'{{x}}'"),
            vec![TokenKind::String("{{x}}".to_string())]
        );
        assert_eq!(
            kinds("{{f}}"),
            vec![
                TokenKind::OpenFn,
                TokenKind::Word("f".into()),
                TokenKind::CloseFn
            ]
        );
    }

    #[test]
    fn comments_and_escapes() {
        assert_eq!(
            kinds("/* q */ SELECT 'it''s' -- trailing\n"),
            vec![
                TokenKind::Word("SELECT".into()),
                TokenKind::String("it's".into())
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            kinds("60.1 1e5 .5 7"),
            vec![
                TokenKind::Number("60.1".into()),
                TokenKind::Number("1e5".into()),
                TokenKind::Number(".5".into()),
                TokenKind::Number("7".into())
            ]
        );
    }

    #[test]
    fn unterminated_string_reports_position() {
        let err = tokenize("SELECT\n  'abc").unwrap_err();
        assert_eq!((err.span.line, err.span.column), (2, 3));
    }
}
