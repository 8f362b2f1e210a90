use thiserror::Error;

use super::{
    is_identifier, Alphabet, Atom, AtomError, Formula, LtlfFormula, PREC_AND, PREC_IMPLIES,
    PREC_OR, PREC_TEMPORAL,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown atom {name:?} at byte {position}")]
    UnknownAtom { name: String, position: usize },
    #[error(transparent)]
    Atom(#[from] AtomError),
}

/// Where the alphabet of a parsed formula comes from.
#[derive(Debug, Clone, Copy)]
pub enum AtomSource<'a> {
    /// The sorted set of identifiers appearing in the text.
    Infer,
    /// A declared alphabet; identifiers outside it are rejected.
    Explicit(&'a Alphabet),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    Next,
    WeakNext,
    Eventually,
    Always,
    Until,
    Release,
    And,
    Or,
    Implies,
    LParen,
    RParen,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::True => "'true'".into(),
        Tok::False => "'false'".into(),
        Tok::Not => "'!'".into(),
        Tok::Next => "'X'".into(),
        Tok::WeakNext => "'N'".into(),
        Tok::Eventually => "'F'".into(),
        Tok::Always => "'G'".into(),
        Tok::Until => "'U'".into(),
        Tok::Release => "'R'".into(),
        Tok::And => "'&'".into(),
        Tok::Or => "'|'".into(),
        Tok::Implies => "'->'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'!' => Tok::Not,
            b'&' => Tok::And,
            b'|' => Tok::Or,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'X' => Tok::Next,
            b'N' => Tok::WeakNext,
            b'F' => Tok::Eventually,
            b'G' => Tok::Always,
            b'U' => Tok::Until,
            b'R' => Tok::Release,
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 1;
                    Tok::Implies
                } else {
                    return Err(ParseError::Syntax {
                        position: i,
                        message: "expected '->'".into(),
                    });
                }
            }
            b'a'..=b'z' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_lowercase() || bytes[j].is_ascii_digit() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &text[i..j];
                debug_assert!(is_identifier(word));
                i = j - 1;
                match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    position: i,
                    message: format!("unexpected character {ch:?}"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    alphabet: Option<&'a Alphabet>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn binary_op(tok: &Tok) -> Option<u8> {
        match tok {
            Tok::Implies => Some(PREC_IMPLIES),
            Tok::Or => Some(PREC_OR),
            Tok::And => Some(PREC_AND),
            Tok::Until | Tok::Release => Some(PREC_TEMPORAL),
            _ => None,
        }
    }

    // Precedence climbing; `->`, `U` and `R` associate to the right.
    fn expr(&mut self, min_prec: u8) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek().cloned() {
            let Some(prec) = Self::binary_op(&tok) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let right_assoc = matches!(tok, Tok::Implies | Tok::Until | Tok::Release);
            let rhs = self.expr(if right_assoc { prec } else { prec + 1 })?;
            lhs = match tok {
                Tok::Implies => Formula::implies(lhs, rhs),
                Tok::Or => Formula::or(lhs, rhs),
                Tok::And => Formula::and(lhs, rhs),
                Tok::Until => Formula::until(lhs, rhs),
                Tok::Release => Formula::release(lhs, rhs),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of formula");
        };
        let position = self.offset();
        self.pos += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Next => Ok(Formula::next(self.unary()?)),
            Tok::WeakNext => Ok(Formula::weak_next(self.unary()?)),
            Tok::Eventually => Ok(Formula::eventually(self.unary()?)),
            Tok::Always => Ok(Formula::always(self.unary()?)),
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::False),
            Tok::Ident(name) => {
                if let Some(ab) = self.alphabet {
                    if ab.index_of(&name).is_none() {
                        return Err(ParseError::UnknownAtom { name, position });
                    }
                }
                Ok(Formula::Atom(Atom::new(name)?))
            }
            Tok::LParen => {
                let inner = self.expr(PREC_IMPLIES)?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some(t) => {
                        let msg = format!("expected ')', found {}", describe(t));
                        self.error(msg)
                    }
                    None => self.error("expected ')', found end of formula"),
                }
            }
            other => {
                self.pos -= 1;
                self.error(format!("expected a formula, found {}", describe(&other)))
            }
        }
    }
}

/// Parses the concrete LTLf grammar.
///
/// Precedence from tightest: unary `! X N F G`, then `U R` (right
/// associative), `&`, `|`, and `->` (right associative).
pub fn parse_formula(text: &str, atoms: AtomSource<'_>) -> Result<LtlfFormula, ParseError> {
    let toks = tokenize(text)?;
    let alphabet = match atoms {
        AtomSource::Infer => None,
        AtomSource::Explicit(ab) => Some(ab),
    };
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        alphabet,
    };
    let formula = p.expr(PREC_IMPLIES)?;
    if let Some(t) = p.peek() {
        let msg = format!("unexpected {} after complete formula", describe(t));
        return p.error(msg);
    }
    Ok(match alphabet {
        Some(ab) => LtlfFormula {
            formula,
            alphabet: ab.clone(),
        },
        None => LtlfFormula::with_inferred_alphabet(formula),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Formula {
        parse_formula(s, AtomSource::Infer).unwrap().formula
    }

    fn a(n: &str) -> Formula {
        Formula::atom(n)
    }

    #[test]
    fn reach_avoid_precedence() {
        assert_eq!(
            parse("F a & G !b"),
            Formula::and(
                Formula::eventually(a("a")),
                Formula::always(Formula::not(a("b")))
            )
        );
    }

    #[test]
    fn single_atom() {
        assert_eq!(parse("a"), a("a"));
        assert_eq!(parse("  (a)  "), a("a"));
    }

    #[test]
    fn until_is_right_associative() {
        let hand = Formula::until(a("a"), Formula::until(a("b"), a("c")));
        assert_eq!(parse("a U b U c"), hand);
        assert_eq!(
            parse("a R b U c"),
            Formula::release(a("a"), Formula::until(a("b"), a("c")))
        );
    }

    #[test]
    fn binary_levels() {
        assert_eq!(
            parse("a | b & c"),
            Formula::or(a("a"), Formula::and(a("b"), a("c")))
        );
        assert_eq!(
            parse("a -> b -> c"),
            Formula::implies(a("a"), Formula::implies(a("b"), a("c")))
        );
        assert_eq!(
            parse("a & b & c"),
            Formula::and(Formula::and(a("a"), a("b")), a("c"))
        );
        assert_eq!(
            parse("!b U (a & F b)"),
            Formula::until(
                Formula::not(a("b")),
                Formula::and(a("a"), Formula::eventually(a("b")))
            )
        );
        assert_eq!(
            parse("X a U b"),
            Formula::until(Formula::next(a("a")), a("b"))
        );
        assert_eq!(
            parse("N false | true"),
            Formula::or(Formula::weak_next(Formula::False), Formula::True)
        );
    }

    #[test]
    fn inferred_alphabet_is_sorted() {
        let f = parse_formula("c U (b_1 & a)", AtomSource::Infer).unwrap();
        let names: Vec<_> = f.alphabet.atoms().iter().map(|a| a.as_str()).collect();
        assert_eq!(names, ["a", "b_1", "c"]);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("a U", AtomSource::Infer) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_formula("a & (b", AtomSource::Infer) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_formula("a b", AtomSource::Infer) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse_formula("a - b", AtomSource::Infer).is_err());
        assert!(parse_formula("A", AtomSource::Infer).is_err());
        assert!(parse_formula("", AtomSource::Infer).is_err());
        assert!(parse_formula(")", AtomSource::Infer).is_err());
    }

    #[test]
    fn explicit_alphabet_rejects_unknown_atoms() {
        let ab = Alphabet::from_names(&["a", "b"]).unwrap();
        let ok = parse_formula("F a", AtomSource::Explicit(&ab)).unwrap();
        assert_eq!(ok.alphabet, ab);
        match parse_formula("F a & c", AtomSource::Explicit(&ab)) {
            Err(ParseError::UnknownAtom { name, position }) => {
                assert_eq!(name, "c");
                assert_eq!(position, 6);
            }
            other => panic!("expected unknown atom, got {other:?}"),
        }
    }
}
