use std::fmt;

use serde::Serialize;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Contract,
    Function,
    Returns,
    Return,
    Require,
    If,
    Else,
    While,
    For,
    True,
    False,
    /// Visibility and mutability words (`public`, `view`, ...). Accepted and ignored.
    Modifier(String),
    /// `uintN` / `intN`; the width is validated by the parser.
    IntTy {
        signed: bool,
        width: u16,
    },
    Ident(String),
    /// Decimal literal digits.
    Lit(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Assign,
    PlusAssign,
    MinusAssign,
    PlusPlus,
    MinusMinus,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Token::Contract => "contract",
            Token::Function => "function",
            Token::Returns => "returns",
            Token::Return => "return",
            Token::Require => "require",
            Token::If => "if",
            Token::Else => "else",
            Token::While => "while",
            Token::For => "for",
            Token::True => "true",
            Token::False => "false",
            Token::Modifier(m) => return f.write_str(m),
            Token::IntTy { signed, width } => {
                return write!(f, "{}{}", if *signed { "int" } else { "uint" }, width)
            }
            Token::Ident(name) => return write!(f, "identifier `{name}`"),
            Token::Lit(digits) => return f.write_str(digits),
            Token::LParen => "(",
            Token::RParen => ")",
            Token::LBrace => "{",
            Token::RBrace => "}",
            Token::Semi => ";",
            Token::Comma => ",",
            Token::Assign => "=",
            Token::PlusAssign => "+=",
            Token::MinusAssign => "-=",
            Token::PlusPlus => "++",
            Token::MinusMinus => "--",
            Token::Plus => "+",
            Token::Minus => "-",
            Token::Star => "*",
            Token::Slash => "/",
            Token::Percent => "%",
            Token::Lt => "<",
            Token::Le => "<=",
            Token::Gt => ">",
            Token::Ge => ">=",
            Token::EqEq => "==",
            Token::Ne => "!=",
            Token::AndAnd => "&&",
            Token::OrOr => "||",
            Token::Bang => "!",
            Token::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("{span}: illegal character {found:?}")]
    IllegalChar { span: Span, found: char },
    #[error("{span}: unterminated block comment")]
    UnterminatedComment { span: Span },
}

impl LexError {
    pub fn span(&self) -> Span {
        match self {
            LexError::IllegalChar { span, .. } | LexError::UnterminatedComment { span } => *span,
        }
    }
}

fn keyword(word: &str) -> Option<Token> {
    let tok = match word {
        "contract" => Token::Contract,
        "function" => Token::Function,
        "returns" => Token::Returns,
        "return" => Token::Return,
        "require" => Token::Require,
        "if" => Token::If,
        "else" => Token::Else,
        "while" => Token::While,
        "for" => Token::For,
        "true" => Token::True,
        "false" => Token::False,
        "public" | "private" | "internal" | "external" | "view" | "pure" => {
            Token::Modifier(word.to_string())
        }
        "uint" => Token::IntTy {
            signed: false,
            width: 256,
        },
        "int" => Token::IntTy {
            signed: true,
            width: 256,
        },
        _ => return int_type_word(word),
    };
    Some(tok)
}

fn int_type_word(word: &str) -> Option<Token> {
    let (signed, digits) = if let Some(d) = word.strip_prefix("uint") {
        (false, d)
    } else {
        (true, word.strip_prefix("int")?)
    };
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let width: u16 = digits.parse().ok()?;
    (1..=256)
        .contains(&width)
        .then_some(Token::IntTy { signed, width })
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn span(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }
}

/// Splits source text into tokens. The returned list always ends with `Eof`.
pub fn tokenize(source: &str) -> Result<Vec<SpannedToken>, LexError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') => {
                    let mut ahead = cur.chars.clone();
                    ahead.next();
                    match ahead.next() {
                        Some('/') => {
                            while let Some(c) = cur.bump() {
                                if c == '\n' {
                                    break;
                                }
                            }
                        }
                        Some('*') => {
                            let start = cur.span();
                            cur.bump();
                            cur.bump();
                            let mut closed = false;
                            while let Some(c) = cur.bump() {
                                if c == '*' && cur.eat('/') {
                                    closed = true;
                                    break;
                                }
                            }
                            if !closed {
                                return Err(LexError::UnterminatedComment { span: start });
                            }
                        }
                        _ => break,
                    }
                }
                _ => break,
            }
        }

        let span = cur.span();
        let Some(c) = cur.bump() else {
            out.push(SpannedToken {
                token: Token::Eof,
                span,
            });
            return Ok(out);
        };
        let token = match c {
            '(' => Token::LParen,
            ')' => Token::RParen,
            '{' => Token::LBrace,
            '}' => Token::RBrace,
            ';' => Token::Semi,
            ',' => Token::Comma,
            '*' => Token::Star,
            '/' => Token::Slash,
            '%' => Token::Percent,
            '+' if cur.eat('+') => Token::PlusPlus,
            '+' if cur.eat('=') => Token::PlusAssign,
            '+' => Token::Plus,
            '-' if cur.eat('-') => Token::MinusMinus,
            '-' if cur.eat('=') => Token::MinusAssign,
            '-' => Token::Minus,
            '<' if cur.eat('=') => Token::Le,
            '<' => Token::Lt,
            '>' if cur.eat('=') => Token::Ge,
            '>' => Token::Gt,
            '=' if cur.eat('=') => Token::EqEq,
            '=' => Token::Assign,
            '!' if cur.eat('=') => Token::Ne,
            '!' => Token::Bang,
            '&' if cur.eat('&') => Token::AndAnd,
            '|' if cur.eat('|') => Token::OrOr,
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                Token::Lit(digits)
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let mut word = String::from(c);
                while let Some(d) = cur
                    .peek()
                    .filter(|d| d.is_ascii_alphanumeric() || *d == '_' || *d == '$')
                {
                    word.push(d);
                    cur.bump();
                }
                keyword(&word).unwrap_or(Token::Ident(word))
            }
            other => return Err(LexError::IllegalChar { span, found: other }),
        };
        out.push(SpannedToken { token, span });
    }
}
