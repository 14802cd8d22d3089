use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Atom(String, SourceSpan),
    List(Vec<SExpr>, SourceSpan),
}

impl SExpr {
    pub fn span(&self) -> &SourceSpan {
        match self {
            SExpr::Atom(_, s) | SExpr::List(_, s) => s,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a, _) => Some(a),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }

    /// First element of a list when it is an atom, lowercased.
    pub fn head(&self) -> Option<String> {
        self.as_list()
            .and_then(|l| l.first())
            .and_then(SExpr::as_atom)
            .map(str::to_ascii_lowercase)
    }
}

/// Reads exactly one top-level s-expression (comments start with `;`).
pub fn read(file: &str, text: &str) -> Result<SExpr, ParseError> {
    let mut reader = Reader {
        file,
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
    };
    reader.skip_ws();
    if reader.at_end() {
        return Err(reader.error("empty input"));
    }
    let expr = reader.expr(0)?;
    reader.skip_ws();
    if !reader.at_end() {
        return Err(reader.error("trailing input after top-level expression"));
    }
    Ok(expr)
}

const MAX_DEPTH: usize = 256;

struct Reader<'a> {
    file: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Reader<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn span(&self) -> SourceSpan {
        SourceSpan {
            file: self.file.to_string(),
            line: self.line,
            column: self.col,
        }
    }

    fn error(&self, msg: &str) -> ParseError {
        ParseError::new(self.span(), msg)
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.pos];
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while !self.at_end() {
            let c = self.chars[self.pos];
            if c == ';' {
                while !self.at_end() && self.chars[self.pos] != '\n' {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expr(&mut self, depth: usize) -> Result<SExpr, ParseError> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let span = self.span();
        match self.chars[self.pos] {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.at_end() {
                        return Err(ParseError::new(span, "unbalanced parenthesis"));
                    }
                    if self.chars[self.pos] == ')' {
                        self.bump();
                        return Ok(SExpr::List(items, span));
                    }
                    items.push(self.expr(depth + 1)?);
                }
            }
            ')' => Err(self.error("unexpected `)`")),
            _ => {
                let mut s = String::new();
                while !self.at_end() {
                    let c = self.chars[self.pos];
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(self.bump());
                }
                Ok(SExpr::Atom(s, span))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let e = read("f", "; c\n(a (b c)\n  d)").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(e.span().line, 2);
        assert_eq!(items[2].span().line, 3);
        assert_eq!(items[2].span().column, 3);
    }

    #[test]
    fn reports_unbalanced() {
        let err = read("f", "(a (b)").unwrap_err();
        assert_eq!(err.to_string(), "f:1:1: unbalanced parenthesis");
        let err = read("f", "(a))").unwrap_err();
        assert!(err.to_string().contains("trailing"));
        assert!(read("f", "   ").is_err());
    }

    #[test]
    fn depth_limit() {
        let text = "(".repeat(1000) + &")".repeat(1000);
        assert!(read("f", &text).is_err());
    }
}
