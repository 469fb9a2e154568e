//! Recursive-descent parser for monotone policy formulas.
//!
//! ```text
//! expr   := term (OR term)*
//! term   := factor (AND factor)*
//! factor := ATTR | '(' expr ')'
//! ```
//!
//! `AND`/`OR` are case-insensitive keywords. Attributes are either double
//! quoted (with `\"` and `\\` escapes) or bare runs of characters other
//! than whitespace, parentheses and quotes.

use super::{PolicyError, PolicyNode, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    And,
    Or,
    Attr(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, PolicyError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        let token_no = out.len() + 1;
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push(Spanned { tok: Tok::LParen, offset });
            }
            ')' => {
                chars.next();
                out.push(Spanned { tok: Tok::RParen, offset });
            }
            '"' => {
                chars.next();
                let mut value = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => value.push(e),
                            _ => {
                                return Err(PolicyError::Syntax {
                                    token: token_no,
                                    offset,
                                    message: "bad escape in quoted attribute".into(),
                                })
                            }
                        },
                        c => value.push(c),
                    }
                }
                if !closed {
                    return Err(PolicyError::Syntax {
                        token: token_no,
                        offset,
                        message: "unterminated quoted attribute".into(),
                    });
                }
                out.push(Spanned { tok: Tok::Attr(value), offset });
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                let tok = if word.eq_ignore_ascii_case("and") {
                    Tok::And
                } else if word.eq_ignore_ascii_case("or") {
                    Tok::Or
                } else {
                    Tok::Attr(word)
                };
                out.push(Spanned { tok, offset });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    text_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn error(&self, message: &str) -> PolicyError {
        PolicyError::Syntax {
            token: self.pos + 1,
            offset: self.toks.get(self.pos).map_or(self.text_len, |s| s.offset),
            message: message.into(),
        }
    }

    fn expr(&mut self, nesting: usize) -> Result<PolicyNode, PolicyError> {
        let mut terms = vec![self.term(nesting)?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            terms.push(self.term(nesting)?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { PolicyNode::Or(terms) })
    }

    fn term(&mut self, nesting: usize) -> Result<PolicyNode, PolicyError> {
        let mut factors = vec![self.factor(nesting)?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            factors.push(self.factor(nesting)?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { PolicyNode::And(factors) })
    }

    fn factor(&mut self, nesting: usize) -> Result<PolicyNode, PolicyError> {
        match self.peek().cloned() {
            Some(Tok::Attr(a)) => {
                self.pos += 1;
                Ok(PolicyNode::Leaf(a))
            }
            Some(Tok::LParen) => {
                // Parenthesis nesting is bounded separately from formula depth
                // so that redundant parentheses cannot exhaust the stack.
                if nesting >= MAX_DEPTH * 4 {
                    return Err(PolicyError::TooDeep);
                }
                self.pos += 1;
                let inner = self.expr(nesting + 1)?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => Err(self.error("expected attribute or '('")),
            None => Err(self.error("unexpected end of policy")),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<PolicyNode, PolicyError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(PolicyError::Empty);
    }
    let mut p = Parser { toks, pos: 0, text_len: text.len() };
    let node = p.expr(0)?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_are_case_insensitive() {
        let n = parse("a and b Or c").unwrap();
        assert_eq!(
            n,
            PolicyNode::Or(vec![
                PolicyNode::And(vec![PolicyNode::Leaf("a".into()), PolicyNode::Leaf("b".into())]),
                PolicyNode::Leaf("c".into()),
            ])
        );
    }

    #[test]
    fn quoted_escapes() {
        assert_eq!(
            parse(r#""say \"hi\" \\ now""#).unwrap(),
            PolicyNode::Leaf(r#"say "hi" \ now"#.into())
        );
        assert!(matches!(parse(r#""open"#), Err(PolicyError::Syntax { .. })));
        assert!(matches!(parse(r#""bad \n""#), Err(PolicyError::Syntax { .. })));
    }

    #[test]
    fn quoted_keyword_is_an_attribute() {
        assert_eq!(parse(r#""AND""#).unwrap(), PolicyNode::Leaf("AND".into()));
    }

    #[test]
    fn error_positions() {
        match parse("A AND (B OR C") {
            Err(PolicyError::Syntax { token, offset, .. }) => {
                assert_eq!(token, 7);
                assert_eq!(offset, 13);
            }
            other => panic!("{other:?}"),
        }
        match parse("A B") {
            Err(PolicyError::Syntax { token, .. }) => assert_eq!(token, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("()"), Err(PolicyError::Syntax { token: 2, .. })));
    }

    #[test]
    fn runaway_parentheses_are_bounded() {
        let text = format!("{}A{}", "(".repeat(5000), ")".repeat(5000));
        assert_eq!(parse(&text), Err(PolicyError::TooDeep));
    }
}
