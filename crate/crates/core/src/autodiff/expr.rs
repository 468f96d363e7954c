use super::real::{Elem, Real};

/// Closed-form expression tree over the primitive set, generic in its leaves.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr<L> {
    Const(f64),
    Leaf(L),
    Neg(Box<Expr<L>>),
    Add(Box<Expr<L>>, Box<Expr<L>>),
    Sub(Box<Expr<L>>, Box<Expr<L>>),
    Mul(Box<Expr<L>>, Box<Expr<L>>),
    Div(Box<Expr<L>>, Box<Expr<L>>),
    Pow(Box<Expr<L>>, f64),
    Apply(Elem, Box<Expr<L>>),
}

impl<L> Expr<L> {
    pub fn leaf(l: L) -> Self {
        Expr::Leaf(l)
    }

    pub fn eval<T: Real>(&self, leaf: &mut dyn FnMut(&L) -> T) -> T {
        match self {
            Expr::Const(c) => T::cst(*c),
            Expr::Leaf(l) => leaf(l),
            Expr::Neg(a) => -a.eval(leaf),
            Expr::Add(a, b) => {
                if let Expr::Const(c) = **b {
                    return a.eval(leaf) + c;
                }
                a.eval(leaf) + b.eval(leaf)
            }
            Expr::Sub(a, b) => {
                if let Expr::Const(c) = **b {
                    return a.eval(leaf) - c;
                }
                a.eval(leaf) - b.eval(leaf)
            }
            Expr::Mul(a, b) => match (&**a, &**b) {
                (Expr::Const(c), _) => b.eval(leaf) * *c,
                (_, Expr::Const(c)) => a.eval(leaf) * *c,
                _ => a.eval(leaf) * b.eval(leaf),
            },
            Expr::Div(a, b) => {
                if let Expr::Const(c) = **b {
                    return a.eval(leaf) / c;
                }
                a.eval(leaf) / b.eval(leaf)
            }
            Expr::Pow(a, p) => a.eval(leaf).powf(*p),
            Expr::Apply(f, a) => a.eval(leaf).elem(*f),
        }
    }

    /// Visits every leaf in depth-first, left-to-right order.
    pub fn visit_leaves<'a>(&'a self, f: &mut dyn FnMut(&'a L)) {
        match self {
            Expr::Const(_) => {}
            Expr::Leaf(l) => f(l),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Apply(_, a) => a.visit_leaves(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_leaves(f);
                b.visit_leaves(f);
            }
        }
    }

    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |l| out.push(l));
        out
    }

    pub fn try_map_leaves<M, E>(&self, f: &mut dyn FnMut(&L) -> Result<Expr<M>, E>) -> Result<Expr<M>, E> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Leaf(l) => f(l)?,
            Expr::Neg(a) => Expr::Neg(Box::new(a.try_map_leaves(f)?)),
            Expr::Add(a, b) => Expr::Add(Box::new(a.try_map_leaves(f)?), Box::new(b.try_map_leaves(f)?)),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.try_map_leaves(f)?), Box::new(b.try_map_leaves(f)?)),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.try_map_leaves(f)?), Box::new(b.try_map_leaves(f)?)),
            Expr::Div(a, b) => Expr::Div(Box::new(a.try_map_leaves(f)?), Box::new(b.try_map_leaves(f)?)),
            Expr::Pow(a, p) => Expr::Pow(Box::new(a.try_map_leaves(f)?), *p),
            Expr::Apply(g, a) => Expr::Apply(*g, Box::new(a.try_map_leaves(f)?)),
        })
    }
}
