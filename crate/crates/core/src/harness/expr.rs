//! Density expressions in the coordinates `x`, `y`, `z` (or `x1 .. xn`).

use meval::{ContextProvider, Expr, FuncEvalError};

use crate::error::{invalid, Result};

/// A parsed expression, evaluable from several threads.
#[derive(Debug, Clone)]
pub struct DensityExpr {
    source: String,
    expr: Expr,
    dim: usize,
}

struct Coords<'a>(&'a [f64]);

impl ContextProvider for Coords<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        let x = self.0;
        match name {
            "x" => x.first().copied(),
            "y" => x.get(1).copied(),
            "z" => x.get(2).copied(),
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => name
                .strip_prefix('x')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .and_then(|k| x.get(k - 1).copied()),
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> std::result::Result<f64, FuncEvalError> {
        let one = |f: fn(f64) -> f64| match args {
            [a] => Ok(f(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        };
        match name {
            "sqrt" => one(f64::sqrt),
            "exp" => one(f64::exp),
            "ln" => one(f64::ln),
            "abs" => one(f64::abs),
            "sin" => one(f64::sin),
            "cos" => one(f64::cos),
            "tan" => one(f64::tan),
            "tanh" => one(f64::tanh),
            "floor" => one(f64::floor),
            "ceil" => one(f64::ceil),
            "signum" => one(f64::signum),
            "max" | "min" if args.is_empty() => Err(FuncEvalError::TooFewArguments),
            "max" => Ok(args.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            "min" => Ok(args.iter().copied().fold(f64::INFINITY, f64::min)),
            _ => Err(FuncEvalError::UnknownFunction),
        }
    }
}

impl DensityExpr {
    /// Parses `source` and checks that it evaluates at the origin.
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        let expr: Expr = source
            .parse()
            .map_err(|e| invalid(format!("cannot parse density {source:?}: {e}")))?;
        let origin = vec![0.0; dim];
        expr.eval_with_context(Coords(&origin))
            .map_err(|e| invalid(format!("cannot evaluate density {source:?}: {e}")))?;
        Ok(Self {
            source: source.to_string(),
            expr,
            dim,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `x`; evaluation failures give NaN, which density
    /// integration rejects.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.expr.eval_with_context(Coords(x)).unwrap_or(f64::NAN)
    }
}
