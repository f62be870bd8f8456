//! Recursive-descent parser for instruction text.
//!
//! Whitespace between tokens is ignored. Quoted attribute words accept `'`
//! or a backtick as the opening quote and `'` as the closing quote, so both
//! `Color('red', ...)` and the typeset form ``Color(`red', ...)`` parse.
//! `square` is accepted as an alias for the canonical shape word `rect`.
//! Syntax errors carry the byte offset of the offending token; instructions
//! that parse but violate well-formedness are rejected with the underlying
//! semantic error.

use crate::{
    ArrInstruction, ArrangementWord, Descriptor, Instruction, Operand, RelInstruction, Relation,
    SemanticError,
};
use gridlu_env::{ColorId, Shape};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {at}: expected {expected}, found {found}")]
    Syntax {
        at: usize,
        expected: String,
        found: String,
    },
    #[error("ill-formed instruction: {0}")]
    Semantic(#[from] SemanticError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(w) => format!("'{w}'"),
            Tok::Quoted(w) => format!("quoted '{w}'"),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::Comma => "','".to_string(),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    at: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            at: 0,
        }
    }

    fn error(&self, at: usize, expected: &str, found: String) -> ParseError {
        ParseError::Syntax {
            at,
            expected: expected.to_string(),
            found,
        }
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        while self.at < self.src.len() && self.src[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
        let start = self.at;
        if start >= self.src.len() {
            return Ok((start, Tok::End));
        }
        let b = self.src[start];
        match b {
            b'(' => {
                self.at += 1;
                Ok((start, Tok::LParen))
            }
            b')' => {
                self.at += 1;
                Ok((start, Tok::RParen))
            }
            b',' => {
                self.at += 1;
                Ok((start, Tok::Comma))
            }
            b'\'' | b'`' => {
                self.at += 1;
                let word_start = self.at;
                while self.at < self.src.len() && self.src[self.at].is_ascii_alphabetic() {
                    self.at += 1;
                }
                if self.at >= self.src.len() || self.src[self.at] != b'\'' {
                    return Err(self.error(
                        self.at,
                        "closing quote",
                        String::from_utf8_lossy(&self.src[self.at.min(self.src.len() - 1)..][..1])
                            .into_owned(),
                    ));
                }
                let word =
                    String::from_utf8(self.src[word_start..self.at].to_vec()).expect("ascii");
                self.at += 1;
                Ok((start, Tok::Quoted(word)))
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                while self.at < self.src.len()
                    && (self.src[self.at].is_ascii_alphanumeric() || self.src[self.at] == b'_')
                {
                    self.at += 1;
                }
                let word = String::from_utf8(self.src[start..self.at].to_vec()).expect("ascii");
                Ok((start, Tok::Ident(word)))
            }
            _ => Err(self.error(start, "a token", format!("byte {:?}", b as char))),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            lexer: Lexer::new(src),
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        self.lexer.next_tok()
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (at, tok) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                at,
                expected: what.to_string(),
                found: tok.describe(),
            })
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(usize, String), ParseError> {
        let (at, tok) = self.next()?;
        match tok {
            Tok::Ident(w) => Ok((at, w)),
            other => Err(ParseError::Syntax {
                at,
                expected: what.to_string(),
                found: other.describe(),
            }),
        }
    }

    fn quoted_color(&mut self) -> Result<ColorId, ParseError> {
        let (at, tok) = self.next()?;
        let word = match tok {
            Tok::Quoted(w) => w,
            other => {
                return Err(ParseError::Syntax {
                    at,
                    expected: "a quoted color word".to_string(),
                    found: other.describe(),
                })
            }
        };
        match word.as_str() {
            "red" => Ok(ColorId::Red),
            "green" => Ok(ColorId::Green),
            "blue" => Ok(ColorId::Blue),
            _ => Err(ParseError::Syntax {
                at,
                expected: "one of 'red', 'green', 'blue'".to_string(),
                found: format!("'{word}'"),
            }),
        }
    }

    fn quoted_shape(&mut self) -> Result<Shape, ParseError> {
        let (at, tok) = self.next()?;
        let word = match tok {
            Tok::Quoted(w) => w,
            other => {
                return Err(ParseError::Syntax {
                    at,
                    expected: "a quoted shape word".to_string(),
                    found: other.describe(),
                })
            }
        };
        match word.as_str() {
            "circle" => Ok(Shape::Circle),
            "rect" | "square" => Ok(Shape::Rect),
            "triangle" => Ok(Shape::Triangle),
            _ => Err(ParseError::Syntax {
                at,
                expected: "one of 'circle', 'rect', 'triangle'".to_string(),
                found: format!("'{word}'"),
            }),
        }
    }

    /// `Shape('<shape>', SCENE)` after the `Shape` head has been consumed.
    fn shape_call_tail(&mut self) -> Result<Shape, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let shape = self.quoted_shape()?;
        self.expect(Tok::Comma, "','")?;
        let (at, word) = self.expect_ident("SCENE")?;
        if word != "SCENE" {
            return Err(ParseError::Syntax {
                at,
                expected: "SCENE".to_string(),
                found: format!("'{word}'"),
            });
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(shape)
    }

    /// Object descriptor: `Color('<color>', <Shape call or SCENE>)`
    /// or `Shape('<shape>', SCENE)`. The head ident is already consumed.
    fn object_tail(&mut self, at: usize, head: &str) -> Result<Descriptor, ParseError> {
        match head {
            "Color" => {
                self.expect(Tok::LParen, "'('")?;
                let color = self.quoted_color()?;
                self.expect(Tok::Comma, "','")?;
                let (at2, word) = self.expect_ident("SCENE or Shape")?;
                let shape = match word.as_str() {
                    "SCENE" => None,
                    "Shape" => Some(self.shape_call_tail()?),
                    _ => {
                        return Err(ParseError::Syntax {
                            at: at2,
                            expected: "SCENE or Shape".to_string(),
                            found: format!("'{word}'"),
                        })
                    }
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(Descriptor {
                    color: Some(color),
                    shape,
                })
            }
            "Shape" => Ok(Descriptor {
                color: None,
                shape: Some(self.shape_call_tail()?),
            }),
            _ => Err(ParseError::Syntax {
                at,
                expected: "AGENT, Color, or Shape".to_string(),
                found: format!("'{head}'"),
            }),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        let (at, head) = self.expect_ident("AGENT, Color, or Shape")?;
        if head == "AGENT" {
            return Ok(Operand::Agent);
        }
        Ok(Operand::Object(self.object_tail(at, &head)?))
    }

    fn relation_tail(&mut self, relation: Relation) -> Result<RelInstruction, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let left = self.operand()?;
        self.expect(Tok::Comma, "','")?;
        let right = self.operand()?;
        self.expect(Tok::RParen, "')'")?;
        Ok(RelInstruction::new(relation, left, right)?)
    }

    fn arrangement_tail(&mut self, word: ArrangementWord) -> Result<ArrInstruction, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let (at, head) = self.expect_ident("AGENT")?;
        if head != "AGENT" {
            return Err(ParseError::Syntax {
                at,
                expected: "AGENT".to_string(),
                found: format!("'{head}'"),
            });
        }
        self.expect(Tok::Comma, "','")?;
        let (at2, arg) = self.expect_ident("SCENE or Color")?;
        let color = match arg.as_str() {
            "SCENE" => None,
            "Color" => {
                self.expect(Tok::LParen, "'('")?;
                let c = self.quoted_color()?;
                self.expect(Tok::Comma, "','")?;
                let (at3, word) = self.expect_ident("SCENE")?;
                if word != "SCENE" {
                    return Err(ParseError::Syntax {
                        at: at3,
                        expected: "SCENE".to_string(),
                        found: format!("'{word}'"),
                    });
                }
                self.expect(Tok::RParen, "')'")?;
                Some(c)
            }
            _ => {
                return Err(ParseError::Syntax {
                    at: at2,
                    expected: "SCENE or Color".to_string(),
                    found: format!("'{arg}'"),
                })
            }
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(ArrInstruction { word, color })
    }

    fn instruction(&mut self) -> Result<Instruction, ParseError> {
        let (at, head) = self.expect_ident("an instruction head word")?;
        let relation = match head.as_str() {
            "NorthFrom" => Some(Relation::NorthFrom),
            "SouthFrom" => Some(Relation::SouthFrom),
            "EastFrom" => Some(Relation::EastFrom),
            "WestFrom" => Some(Relation::WestFrom),
            "SameLocation" => Some(Relation::SameLocation),
            _ => None,
        };
        if let Some(relation) = relation {
            return Ok(Instruction::Relation(self.relation_tail(relation)?));
        }
        let word = ArrangementWord::ALL
            .into_iter()
            .find(|w| w.name() == head)
            .ok_or_else(|| ParseError::Syntax {
                at,
                expected: "a relation or arrangement word".to_string(),
                found: format!("'{head}'"),
            })?;
        Ok(Instruction::Arrangement(self.arrangement_tail(word)?))
    }

    fn eof(&mut self) -> Result<(), ParseError> {
        let (at, tok) = self.next()?;
        if tok == Tok::End {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                at,
                expected: "end of input".to_string(),
                found: tok.describe(),
            })
        }
    }
}

/// Parse one instruction; the whole input must be consumed.
pub fn parse(text: &str) -> Result<Instruction, ParseError> {
    let mut p = Parser::new(text);
    let instr = p.instruction()?;
    p.eof()?;
    Ok(instr)
}
