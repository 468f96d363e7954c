//! Recursive-descent parser for problem expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' args ')' | '(' expr ')'
//! ```
//!
//! Names resolve to coordinates, fields, trainable scalars, `pi`, and inside
//! a Volterra kernel, the integration variable `iota`. Calls are the
//! elementary functions plus `d(f, x)`, `d2(f, x)`, `d2(f, x, y)`,
//! `caputo(f, alpha)` and `volterra(kernel, f)`. Exponents must be constant.

use crate::autodiff::{Elem, Expr};

use super::{Deriv, Leaf, ProblemError, ProblemExpr, VolterraTerm};

/// What a parsed expression may refer to.
#[derive(Clone, Copy, Debug, Default)]
pub struct Allow {
    pub fields: bool,
    pub derivatives: bool,
    pub operators: bool,
    pub scalars: bool,
    pub iota: bool,
}

impl Allow {
    pub const COORDS: Allow = Allow {
        fields: false,
        derivatives: false,
        operators: false,
        scalars: false,
        iota: false,
    };
    pub const VALUES: Allow = Allow {
        fields: true,
        ..Allow::COORDS
    };
    pub const DYNAMICS: Allow = Allow {
        fields: true,
        derivatives: true,
        operators: true,
        scalars: true,
        iota: false,
    };
}

pub struct Names<'a> {
    pub coords: &'a [String],
    pub fields: &'a [String],
    pub scalars: &'a [String],
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, (usize, String)> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text
                .parse::<f64>()
                .map_err(|_| (start, format!("bad number '{text}'")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Name(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err((i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a, 'n> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    names: &'a Names<'n>,
    allow: Allow,
    volterra: &'a mut Vec<VolterraTerm>,
}

type PResult<T> = Result<T, ProblemError>;

impl Parser<'_, '_> {
    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let at = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.src.len());
        Err(ProblemError::Parse {
            expr: self.src.to_string(),
            pos: at,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> PResult<()> {
        if self.eat(op) {
            Ok(())
        } else {
            self.err(format!("expected '{op}'"))
        }
    }

    fn expr(&mut self) -> PResult<ProblemExpr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> PResult<ProblemExpr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<ProblemExpr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<ProblemExpr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exp = self.unary()?;
        match constant_value(&exp) {
            Some(p) => Ok(Expr::Pow(Box::new(base), p)),
            None => self.err("exponent must be a constant"),
        }
    }

    fn constant_arg(&mut self) -> PResult<f64> {
        let e = self.expr()?;
        match constant_value(&e) {
            Some(v) => Ok(v),
            None => self.err("expected a constant"),
        }
    }

    fn field_arg(&mut self) -> PResult<usize> {
        match self.peek().cloned() {
            Some(Tok::Name(n)) => match self.names.fields.iter().position(|f| *f == n) {
                Some(i) => {
                    self.pos += 1;
                    Ok(i)
                }
                None => self.err(format!("'{n}' is not a field")),
            },
            _ => self.err("expected a field name"),
        }
    }

    fn coord_arg(&mut self) -> PResult<usize> {
        match self.peek().cloned() {
            Some(Tok::Name(n)) => match self.names.coords.iter().position(|c| *c == n) {
                Some(i) => {
                    self.pos += 1;
                    Ok(i)
                }
                None => self.err(format!("'{n}' is not a coordinate")),
            },
            _ => self.err("expected a coordinate name"),
        }
    }

    fn atom(&mut self) -> PResult<ProblemExpr> {
        let tok = match self.peek().cloned() {
            Some(t) => t,
            None => return self.err("unexpected end of expression"),
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
            Tok::Name(name) => {
                self.pos += 1;
                if self.eat('(') {
                    let e = self.call(&name)?;
                    self.expect(')')?;
                    Ok(e)
                } else {
                    self.pos -= 1;
                    let e = self.name(&name)?;
                    self.pos += 1;
                    Ok(e)
                }
            }
        }
    }

    fn name(&self, name: &str) -> PResult<ProblemExpr> {
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(i) = self.names.coords.iter().position(|c| c == name) {
            return Ok(Expr::Leaf(Leaf::Coord(i)));
        }
        if let Some(i) = self.names.fields.iter().position(|c| c == name) {
            if !self.allow.fields {
                return self.err(format!("field '{name}' is not allowed here"));
            }
            return Ok(Expr::Leaf(Leaf::Field {
                field: i,
                deriv: Deriv::Value,
            }));
        }
        if let Some(i) = self.names.scalars.iter().position(|c| c == name) {
            if !self.allow.scalars {
                return self.err(format!("scalar '{name}' is not allowed here"));
            }
            return Ok(Expr::Leaf(Leaf::Scalar(i)));
        }
        if name == "iota" {
            if !self.allow.iota {
                return self.err("'iota' is only available inside a volterra kernel");
            }
            return Ok(Expr::Leaf(Leaf::Iota));
        }
        self.err(format!("unknown name '{name}'"))
    }

    fn call(&mut self, name: &str) -> PResult<ProblemExpr> {
        let elem = match name {
            "exp" => Some(Elem::Exp),
            "ln" | "log" => Some(Elem::Ln),
            "sin" => Some(Elem::Sin),
            "cos" => Some(Elem::Cos),
            "sqrt" => Some(Elem::Sqrt),
            "tanh" => Some(Elem::Tanh),
            "sigmoid" => Some(Elem::Sigmoid),
            "silu" => Some(Elem::Silu),
            _ => None,
        };
        if let Some(f) = elem {
            return Ok(Expr::Apply(f, Box::new(self.expr()?)));
        }
        match name {
            "d" | "d2" => {
                if !self.allow.derivatives {
                    return self.err("derivatives are not allowed here");
                }
                let field = self.field_arg()?;
                self.expect(',')?;
                let a = self.coord_arg()?;
                let deriv = if name == "d" {
                    Deriv::First(a)
                } else if self.eat(',') {
                    let b = self.coord_arg()?;
                    Deriv::Second(a.min(b), a.max(b))
                } else {
                    Deriv::Second(a, a)
                };
                Ok(Expr::Leaf(Leaf::Field { field, deriv }))
            }
            "caputo" => {
                if !self.allow.operators {
                    return self.err("caputo() is not allowed here");
                }
                let field = self.field_arg()?;
                self.expect(',')?;
                let alpha = self.constant_arg()?;
                Ok(Expr::Leaf(Leaf::Caputo { field, alpha }))
            }
            "volterra" => {
                if !self.allow.operators {
                    return self.err("volterra() is not allowed here");
                }
                let saved = self.allow;
                self.allow = Allow {
                    iota: true,
                    ..Allow::COORDS
                };
                let kernel = self.expr();
                self.allow = saved;
                let kernel = kernel?;
                self.expect(',')?;
                let field = self.field_arg()?;
                self.volterra.push(VolterraTerm { kernel, field });
                Ok(Expr::Leaf(Leaf::Volterra(self.volterra.len() - 1)))
            }
            _ => self.err(format!("unknown function '{name}'")),
        }
    }
}

/// Value of an expression without leaves.
pub fn constant_value(e: &ProblemExpr) -> Option<f64> {
    if e.leaves().is_empty() {
        Some(e.eval::<f64>(&mut |_| unreachable!()))
    } else {
        None
    }
}

/// Parses `src`; Volterra terms are appended to `volterra` and referenced by index.
pub fn parse_expr(
    src: &str,
    names: &Names<'_>,
    allow: Allow,
    volterra: &mut Vec<VolterraTerm>,
) -> Result<ProblemExpr, ProblemError> {
    let toks = tokenize(src).map_err(|(pos, msg)| ProblemError::Parse {
        expr: src.to_string(),
        pos,
        msg,
    })?;
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        names,
        allow,
        volterra,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses an expression that may only use coordinates and constants.
pub fn parse_coord_expr(src: &str, coords: &[String]) -> Result<ProblemExpr, ProblemError> {
    let names = Names {
        coords,
        fields: &[],
        scalars: &[],
    };
    parse_expr(src, &names, Allow::COORDS, &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> (Vec<String>, Vec<String>, Vec<String>) {
        (
            vec!["x".into(), "t".into()],
            vec!["u".into(), "y".into()],
            vec!["k".into()],
        )
    }

    fn eval(e: &ProblemExpr, x: f64, t: f64) -> f64 {
        e.eval(&mut |l: &Leaf| match l {
            Leaf::Coord(0) => x,
            Leaf::Coord(_) => t,
            _ => panic!("unexpected leaf"),
        })
    }

    #[test]
    fn precedence_and_constants() {
        let (c, f, s) = names();
        let n = Names {
            coords: &c,
            fields: &f,
            scalars: &s,
        };
        let mut v = Vec::new();
        let e = parse_expr("1 + 2*x^2 - -t/4", &n, Allow::COORDS, &mut v).unwrap();
        assert!((eval(&e, 3.0, 2.0) - (1.0 + 18.0 + 0.5)).abs() < 1e-14);
        let e = parse_expr("2^3^2", &n, Allow::COORDS, &mut v).unwrap();
        assert_eq!(constant_value(&e), Some(512.0));
        let e = parse_expr("-x^2", &n, Allow::COORDS, &mut v).unwrap();
        assert_eq!(eval(&e, 3.0, 0.0), -9.0);
        let e = parse_expr("15*sqrt(pi)/16", &n, Allow::COORDS, &mut v).unwrap();
        assert!((constant_value(&e).unwrap() - 1.6616755).abs() < 1e-6);
        let e = parse_expr("2.5e-1 * exp(x) + sin(t)*cos(t)", &n, Allow::COORDS, &mut v).unwrap();
        assert!((eval(&e, 0.0, 0.3) - (0.25 + 0.3f64.sin() * 0.3f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn operators_and_leaves() {
        let (c, f, s) = names();
        let n = Names {
            coords: &c,
            fields: &f,
            scalars: &s,
        };
        let mut v = Vec::new();
        let e = parse_expr(
            "d(y, t) - d2(y, x) - d2(y, t, x) + caputo(u, 0.5) + k*volterra(t*iota, y)",
            &n,
            Allow::DYNAMICS,
            &mut v,
        )
        .unwrap();
        let leaves = e.leaves();
        assert_eq!(
            leaves[0],
            &Leaf::Field {
                field: 1,
                deriv: Deriv::First(1)
            }
        );
        assert_eq!(
            leaves[1],
            &Leaf::Field {
                field: 1,
                deriv: Deriv::Second(0, 0)
            }
        );
        assert_eq!(
            leaves[2],
            &Leaf::Field {
                field: 1,
                deriv: Deriv::Second(0, 1)
            }
        );
        assert_eq!(leaves[3], &Leaf::Caputo { field: 0, alpha: 0.5 });
        assert_eq!(leaves[4], &Leaf::Scalar(0));
        assert_eq!(leaves[5], &Leaf::Volterra(0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, 1);
        assert_eq!(v[0].kernel.leaves(), vec![&Leaf::Coord(1), &Leaf::Iota]);
    }

    #[test]
    fn errors_report_position() {
        let (c, f, s) = names();
        let n = Names {
            coords: &c,
            fields: &f,
            scalars: &s,
        };
        let mut v = Vec::new();
        for (src, allow) in [
            ("x +", Allow::COORDS),
            ("x ^ t", Allow::COORDS),
            ("foo(x)", Allow::COORDS),
            ("u", Allow::COORDS),
            ("d(u, t)", Allow::VALUES),
            ("iota", Allow::DYNAMICS),
            ("caputo(u, x)", Allow::DYNAMICS),
            ("d(x, t)", Allow::DYNAMICS),
            ("(x", Allow::COORDS),
            ("x $ t", Allow::COORDS),
            ("x t", Allow::COORDS),
        ] {
            match parse_expr(src, &n, allow, &mut v) {
                Err(ProblemError::Parse { pos, .. }) => assert!(pos <= src.len()),
                other => panic!("{src}: {other:?}"),
            }
        }
    }
}
