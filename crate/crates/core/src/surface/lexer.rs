use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    // keywords
    Fun,
    Rec,
    Let,
    In,
    If,
    Then,
    Else,
    Return,
    Do,
    With,
    Handle,
    Mrec,
    And,
    True,
    False,
    Effect,
    Signature,
    Type,
    Def,
    Main,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Arrow,
    FatArrow,
    Eq,
    Semi,
    Colon,
    Comma,
    Dot,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Fun => "fun",
            Tok::Rec => "rec",
            Tok::Let => "let",
            Tok::In => "in",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::Return => "return",
            Tok::Do => "do",
            Tok::With => "with",
            Tok::Handle => "handle",
            Tok::Mrec => "mrec",
            Tok::And => "and",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Effect => "effect",
            Tok::Signature => "signature",
            Tok::Type => "type",
            Tok::Def => "def",
            Tok::Main => "main",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Arrow => "->",
            Tok::FatArrow => "=>",
            Tok::Eq => "=",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Slash => "/",
            Tok::Eof => return f.write_str("end of input"),
        };
        write!(f, "`{s}`")
    }
}

pub const KEYWORDS: &[&str] = &[
    "fun", "rec", "let", "in", "if", "then", "else", "return", "do", "with", "handle", "mrec", "and", "true",
    "false", "effect", "signature", "type", "def", "main",
];

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "fun" => Tok::Fun,
        "rec" => Tok::Rec,
        "let" => Tok::Let,
        "in" => Tok::In,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "return" => Tok::Return,
        "do" => Tok::Do,
        "with" => Tok::With,
        "handle" => Tok::Handle,
        "mrec" => Tok::Mrec,
        "and" => Tok::And,
        "true" => Tok::True,
        "false" => Tok::False,
        "effect" => Tok::Effect,
        "signature" => Tok::Signature,
        "type" => Tok::Type,
        "def" => Tok::Def,
        "main" => Tok::Main,
        _ => return None,
    })
}

/// A token with its 1-based line and column and its byte span.
#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    pub start: usize,
    pub end: usize,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '/' && src[i..].starts_with("//") {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let tok = if is_ident_start(c) {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                if !is_ident_char(c) {
                    break;
                }
                end = j + c.len_utf8();
                chars.next();
                col += 1;
            }
            let word = &src[i..end];
            let tok = keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()));
            out.push(Spanned {
                tok,
                line: start_line,
                col: start_col,
                start: i,
                end,
            });
            continue;
        } else {
            let two = &src[i..(i + 2).min(src.len())];
            let (tok, len) = match two {
                "->" => (Tok::Arrow, 2),
                "=>" => (Tok::FatArrow, 2),
                _ => match c {
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    '{' => (Tok::LBrace, 1),
                    '}' => (Tok::RBrace, 1),
                    '=' => (Tok::Eq, 1),
                    ';' => (Tok::Semi, 1),
                    ':' => (Tok::Colon, 1),
                    ',' => (Tok::Comma, 1),
                    '.' => (Tok::Dot, 1),
                    '/' => (Tok::Slash, 1),
                    _ => {
                        return Err(ParseError::new(line, col, format!("unexpected character `{c}`")));
                    }
                },
            };
            for _ in 0..len {
                chars.next();
            }
            col += len;
            (tok, len)
        };
        out.push(Spanned {
            tok: tok.0,
            line: start_line,
            col: start_col,
            start: i,
            end: i + tok.1,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
        start: src.len(),
        end: src.len(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_keywords_and_punctuation() {
        let toks: Vec<Tok> = lex("fun x -> do op x // c\n=> _y'").unwrap().into_iter().map(|s| s.tok).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Fun,
                Tok::Ident("x".into()),
                Tok::Arrow,
                Tok::Do,
                Tok::Ident("op".into()),
                Tok::Ident("x".into()),
                Tok::FatArrow,
                Tok::Ident("_y'".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = lex("x # y").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }
}
