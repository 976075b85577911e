//! Parser for measure descriptions in experiment configs.
//!
//! ```text
//! measure  := "lebesgue"
//!           | "gaussian" "(" num ")"
//!           | "dirac" "(" cnum {"," cnum} ")"
//!           | "atoms" "(" cpoint ":" cnum {"," cpoint ":" cnum} ")"
//!           | "density" "(" string {"," key "=" value} ")"
//!           | "horizontal" "(" real ")"
//!           | "alpha_horizontal" "(" real "," "[" int {"," int} "]" ")"
//!           | "weighted" "(" measure "," "[" num {"," num} "]" ")"
//!           | "pushforward" "(" measure "," "[" cpoint {"," cpoint} "]" ")"
//! real     := the first five forms with real coordinates
//! cpoint   := "[" cnum {"," cnum} "]"
//! cnum     := num | num "i" | "i" | num ("+" | "-") num "i"
//! ```
//!
//! Density keys are `im` (imaginary part, another expression), `rate` and
//! `center` (a Gaussian factor `e^{−rate|w−center|²}`). Expressions use
//! `x1..xn, y1..yn` on `Cⁿ` and `t1..tn` on `Rⁿ`, with `x, y, t` as
//! aliases when `n = 1`.

use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use nalgebra::DMatrix;

use crate::error::{FockError, Result};
use crate::index::SignedHalfIndex;
use crate::measures::{Amplitude, Density, GaussianFactor, MeasureSpec, RealMeasure};
use crate::Complex64 as C64;

/// Parses a measure on `Cⁿ`.
pub fn parse_measure(src: &str, n: usize) -> Result<MeasureSpec> {
    let mut p = Parser::new(src, n);
    let m = p.measure()?;
    p.end()?;
    Ok(m)
}

/// Parses a measure on `Rⁿ`.
pub fn parse_real_measure(src: &str, n: usize) -> Result<RealMeasure> {
    let mut p = Parser::new(src, n);
    let m = p.real()?;
    p.end()?;
    Ok(m)
}

/// A compiled density expression.
#[derive(Clone)]
struct Expr {
    node: Arc<Node<DefaultNumericTypes>>,
    names: Arc<Vec<Vec<String>>>,
}

impl Expr {
    fn compile(src: &str, names: Vec<Vec<String>>) -> std::result::Result<Self, String> {
        let node = build_operator_tree::<DefaultNumericTypes>(src).map_err(|e| e.to_string())?;
        Ok(Expr {
            node: Arc::new(node),
            names: Arc::new(names),
        })
    }

    /// NaN on evaluation failure, so quadrature reports a non-finite node.
    fn eval(&self, vals: &[f64]) -> f64 {
        self.try_eval(vals).unwrap_or(f64::NAN)
    }

    fn try_eval(&self, vals: &[f64]) -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (aliases, &v) in self.names.iter().zip(vals) {
            for name in aliases {
                ctx.set_value(name.clone(), Value::Float(v))
                    .map_err(|e| e.to_string())?;
            }
        }
        self.node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    }
}

fn complex_names(n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::with_capacity(2 * n);
    for prefix in ["x", "y"] {
        for j in 1..=n {
            let mut a = vec![format!("{prefix}{j}")];
            if n == 1 {
                a.push(prefix.to_string());
            }
            out.push(a);
        }
    }
    out
}

fn real_names(n: usize) -> Vec<Vec<String>> {
    (1..=n)
        .map(|j| {
            let mut a = vec![format!("t{j}")];
            if n == 1 {
                a.push("t".to_string());
            }
            a
        })
        .collect()
}

struct DensityArgs {
    re: Expr,
    im: Option<Expr>,
    rate: Option<f64>,
    center: Option<Vec<C64>>,
    label: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize) -> Self {
        Parser { src, pos: 0, n }
    }

    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T> {
        Err(FockError::Parse {
            position: at,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn mark(&mut self) -> usize {
        self.skip_ws();
        self.pos
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        let at = self.pos;
        if self.eat(c) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map(|f| format!("`{f}`"))
                .unwrap_or_else(|| "end of input".into());
            self.err(at, format!("expected `{c}`, found {found}"))
        }
    }

    fn end(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos < self.src.len() {
            return self.err(self.pos, format!("unexpected trailing input `{}`", self.rest()));
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let at = self.pos;
        let len = self
            .rest()
            .char_indices()
            .find(|&(i, c)| !(c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit())))
            .map(|(i, _)| i)
            .unwrap_or(self.rest().len());
        if len == 0 {
            return self.err(at, "expected a name");
        }
        self.pos += len;
        Ok((at, &self.src[at..at + len]))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let at = self.pos;
        let bytes = self.rest().as_bytes();
        let mut i = 0;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
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
        let text = &self.rest()[..i];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += i;
                Ok(v)
            }
            _ => self.err(at, "expected a finite number"),
        }
    }

    fn integer(&mut self) -> Result<i32> {
        let at = self.pos;
        let v = self.number()?;
        if v.fract() != 0.0 || v.abs() > 64.0 {
            return self.err(at, format!("expected a small integer, found {v}"));
        }
        Ok(v as i32)
    }

    /// One signed term of a complex literal, with a flag for `i`.
    fn complex_term(&mut self) -> Result<(f64, bool)> {
        self.skip_ws();
        let mut sign = 1.0;
        let r = self.rest();
        let after_sign = if let Some(s) = r.strip_prefix('-') {
            sign = -1.0;
            s
        } else {
            r.strip_prefix('+').unwrap_or(r)
        };
        if after_sign.starts_with('i') && !after_sign[1..].starts_with(|c: char| c.is_ascii_alphanumeric()) {
            self.pos += r.len() - after_sign.len() + 1;
            return Ok((sign, true));
        }
        let v = self.number()?;
        if self.rest().starts_with('i') {
            self.pos += 1;
            return Ok((v, true));
        }
        Ok((v, false))
    }

    fn complex(&mut self) -> Result<C64> {
        let (a, imag) = self.complex_term()?;
        if imag {
            return Ok(C64::new(0.0, a));
        }
        if matches!(self.peek(), Some('+') | Some('-')) {
            let at = self.pos;
            let (b, imag_b) = self.complex_term()?;
            if !imag_b {
                return self.err(at, "second term of a complex number needs an `i`");
            }
            return Ok(C64::new(a, b));
        }
        Ok(C64::new(a, 0.0))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect('[')?;
        let mut out = vec![item(self)?];
        while self.eat(',') {
            out.push(item(self)?);
        }
        self.expect(']')?;
        Ok(out)
    }

    fn check_dim(&self, at: usize, got: usize) -> Result<()> {
        if got != self.n {
            return self.err(at, format!("expected {} coordinates, found {got}", self.n));
        }
        Ok(())
    }

    fn string(&mut self) -> Result<String> {
        self.skip_ws();
        let at = self.pos;
        if !self.rest().starts_with('"') {
            return self.err(at, "expected a quoted expression");
        }
        match self.rest()[1..].find('"') {
            Some(end) => {
                let s = self.rest()[1..1 + end].to_string();
                self.pos += end + 2;
                Ok(s)
            }
            None => self.err(at, "unterminated string"),
        }
    }

    fn measure(&mut self) -> Result<MeasureSpec> {
        let (at, name) = self.ident()?;
        match name {
            "lebesgue" => Ok(MeasureSpec::lebesgue(self.n)),
            "gaussian" => {
                self.expect('(')?;
                let s = self.number()?;
                self.expect(')')?;
                MeasureSpec::gaussian(self.n, s).or_else(|e| self.err(at, e.to_string()))
            }
            "dirac" => {
                self.expect('(')?;
                let pt = self.comma_separated(Self::complex)?;
                self.check_dim(at, pt.len())?;
                self.expect(')')?;
                Ok(MeasureSpec::dirac(pt))
            }
            "atoms" => {
                self.expect('(')?;
                let mut points = Vec::new();
                let mut weights = Vec::new();
                loop {
                    let here = self.mark();
                    let pt = self.list(Self::complex)?;
                    self.check_dim(here, pt.len())?;
                    self.expect(':')?;
                    weights.push(self.complex()?);
                    points.push(pt);
                    if !self.eat(',') {
                        break;
                    }
                }
                self.expect(')')?;
                MeasureSpec::atoms(points, weights).or_else(|e| self.err(at, e.to_string()))
            }
            "density" => {
                let args = self.density_args(complex_names(self.n), true)?;
                Ok(MeasureSpec::Density(self.complex_density(args)))
            }
            "horizontal" => {
                self.expect('(')?;
                let rho = self.real()?;
                self.expect(')')?;
                Ok(MeasureSpec::horizontal(rho))
            }
            "alpha_horizontal" => {
                self.expect('(')?;
                let rho = self.real()?;
                self.expect(',')?;
                let here = self.mark();
                let alpha = self.list(Self::integer)?;
                self.check_dim(here, alpha.len())?;
                self.expect(')')?;
                MeasureSpec::alpha_horizontal(rho, alpha).or_else(|e| self.err(at, e.to_string()))
            }
            "weighted" => {
                self.expect('(')?;
                let base = self.measure()?;
                self.expect(',')?;
                let here = self.mark();
                let p = self.list(Self::number)?;
                self.check_dim(here, p.len())?;
                let mut doubled = Vec::with_capacity(p.len());
                for v in p {
                    if (2.0 * v).fract() != 0.0 {
                        return self.err(here, format!("weight exponents must be half-integers, found {v}"));
                    }
                    doubled.push((2.0 * v) as i64);
                }
                self.expect(')')?;
                base.weight(&SignedHalfIndex::from_doubled(doubled))
                    .or_else(|e| self.err(at, e.to_string()))
            }
            "pushforward" => {
                self.expect('(')?;
                let base = self.measure()?;
                self.expect(',')?;
                let here = self.mark();
                let rows = self.list(|p| p.list(Self::complex))?;
                self.check_dim(here, rows.len())?;
                for r in &rows {
                    self.check_dim(here, r.len())?;
                }
                self.expect(')')?;
                let x = DMatrix::from_fn(self.n, self.n, |r, c| rows[r][c]);
                base.pushforward(&x).or_else(|e| self.err(at, e.to_string()))
            }
            other => self.err(at, format!("unknown measure `{other}`")),
        }
    }

    fn real(&mut self) -> Result<RealMeasure> {
        let (at, name) = self.ident()?;
        match name {
            "lebesgue" => Ok(RealMeasure::lebesgue(self.n)),
            "gaussian" => {
                self.expect('(')?;
                let s = self.number()?;
                self.expect(')')?;
                RealMeasure::gaussian(self.n, s).or_else(|e| self.err(at, e.to_string()))
            }
            "dirac" => {
                self.expect('(')?;
                let pt = self.comma_separated(Self::number)?;
                self.check_dim(at, pt.len())?;
                self.expect(')')?;
                Ok(RealMeasure::dirac(pt))
            }
            "atoms" => {
                self.expect('(')?;
                let mut points = Vec::new();
                let mut weights = Vec::new();
                loop {
                    let here = self.mark();
                    let pt = self.list(Self::number)?;
                    self.check_dim(here, pt.len())?;
                    self.expect(':')?;
                    weights.push(self.complex()?);
                    points.push(pt);
                    if !self.eat(',') {
                        break;
                    }
                }
                self.expect(')')?;
                RealMeasure::atoms(points, weights).or_else(|e| self.err(at, e.to_string()))
            }
            "density" => {
                let args = self.density_args(real_names(self.n), false)?;
                Ok(RealMeasure::Density(self.real_density(args)?))
            }
            other => self.err(at, format!("unknown measure on R^n `{other}`")),
        }
    }

    fn comma_separated<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let mut out = vec![item(self)?];
        while self.eat(',') {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn density_args(&mut self, names: Vec<Vec<String>>, complex_center: bool) -> Result<DensityArgs> {
        self.expect('(')?;
        self.skip_ws();
        let at = self.pos;
        let src = self.string()?;
        let compile = |p: &Self, at: usize, s: &str| -> Result<Expr> {
            let e = Expr::compile(s, names.clone()).or_else(|m| p.err(at, format!("bad expression: {m}")))?;
            let zero = vec![0.0; names.len()];
            e.try_eval(&zero)
                .or_else(|m| p.err(at, format!("expression fails at the origin: {m}")))?;
            Ok(e)
        };
        let re = compile(self, at, &src)?;
        let mut args = DensityArgs {
            re,
            im: None,
            rate: None,
            center: None,
            label: format!("density(\"{src}\")"),
        };
        while self.eat(',') {
            let (kat, key) = self.ident()?;
            self.expect('=')?;
            match key {
                "im" => {
                    self.skip_ws();
                    let at = self.pos;
                    let s = self.string()?;
                    args.im = Some(compile(self, at, &s)?);
                }
                "rate" => {
                    let r = self.number()?;
                    if r <= 0.0 {
                        return self.err(kat, "rate must be positive");
                    }
                    args.rate = Some(r);
                }
                "center" => {
                    let here = self.mark();
                    let c = if complex_center {
                        self.list(Self::complex)?
                    } else {
                        self.list(Self::number)?.into_iter().map(C64::from).collect()
                    };
                    self.check_dim(here, c.len())?;
                    args.center = Some(c);
                }
                other => return self.err(kat, format!("unknown density key `{other}`")),
            }
        }
        self.expect(')')?;
        if args.center.is_some() && args.rate.is_none() {
            return self.err(at, "`center` needs a `rate`");
        }
        Ok(args)
    }

    fn complex_density(&self, args: DensityArgs) -> Density<C64> {
        let n = self.n;
        let real_valued = args.im.is_none();
        let (re, im) = (args.re, args.im);
        let f = move |w: &[C64]| -> C64 {
            let vals: Vec<f64> = w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect();
            C64::new(re.eval(&vals), im.as_ref().map(|e| e.eval(&vals)).unwrap_or(0.0))
        };
        Density {
            dim: n,
            gaussian: args.rate.map(|rate| GaussianFactor {
                rate,
                center: args.center.unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]),
            }),
            amplitude: Amplitude::General(Arc::new(f)),
            real_valued,
            label: args.label,
        }
    }

    fn real_density(&self, args: DensityArgs) -> Result<Density<f64>> {
        let n = self.n;
        let real_valued = args.im.is_none();
        let (re, im) = (args.re, args.im);
        let f = move |t: &[f64]| -> C64 { C64::new(re.eval(t), im.as_ref().map(|e| e.eval(t)).unwrap_or(0.0)) };
        Ok(Density {
            dim: n,
            gaussian: args.rate.map(|rate| GaussianFactor {
                rate,
                center: args
                    .center
                    .map(|c| c.iter().map(|z| z.re).collect())
                    .unwrap_or_else(|| vec![0.0; n]),
            }),
            amplitude: Amplitude::General(Arc::new(f)),
            real_valued,
            label: args.label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadConfig;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn builtins() {
        assert!(matches!(
            parse_measure("lebesgue", 2).unwrap(),
            MeasureSpec::Lebesgue { dim: 2 }
        ));
        assert!(matches!(
            parse_measure(" gaussian( 1.5 ) ", 1).unwrap(),
            MeasureSpec::Density(_)
        ));
        match parse_measure("dirac(0.3+0.4i, -i)", 2).unwrap() {
            MeasureSpec::Atoms { points, weights, .. } => {
                assert_eq!(points[0], vec![c(0.3, 0.4), c(0.0, -1.0)]);
                assert_eq!(weights[0], c(1.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complex_literals() {
        for (s, z) in [
            ("2", c(2.0, 0.0)),
            ("-1.5i", c(0.0, -1.5)),
            ("i", c(0.0, 1.0)),
            ("1e-3-2i", c(1e-3, -2.0)),
            ("-0.5+0.25i", c(-0.5, 0.25)),
        ] {
            match parse_measure(&format!("dirac({s})"), 1).unwrap() {
                MeasureSpec::Atoms { points, .. } => assert_eq!(points[0][0], z, "{s}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn atoms_and_structures() {
        match parse_measure("atoms([0.1]:2, [0.5i]:1-i)", 1).unwrap() {
            MeasureSpec::Atoms { points, weights, .. } => {
                assert_eq!(points.len(), 2);
                assert_eq!(weights[1], c(1.0, -1.0));
            }
            other => panic!("{other:?}"),
        }
        let h = parse_measure("horizontal(atoms([0]:0.5, [0.7]:0.5))", 1).unwrap();
        assert!(h.horizontal_factor().is_some());
        let a = parse_measure("alpha_horizontal(gaussian(1), [1])", 1).unwrap();
        assert!(matches!(a, MeasureSpec::AlphaHorizontal { .. }));
        let w = parse_measure("weighted(lebesgue, [-0.5, 1])", 2).unwrap();
        assert!(matches!(w, MeasureSpec::Weighted { .. }));
        match parse_measure("pushforward(dirac(1), [[0.6+0.8i]])", 1).unwrap() {
            MeasureSpec::Atoms { points, .. } => assert!((points[0][0] - c(0.6, -0.8)).norm() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(parse_measure("pushforward(gaussian(1), [[0.6, 0], [0, 1]])", 1).is_err());
        let err = parse_measure("pushforward(gaussian(1), [[2]])", 1).unwrap_err();
        assert!(matches!(err, FockError::Parse { position: 0, .. }), "{err}");
    }

    #[test]
    fn density_matches_builtin_gaussian() {
        let cfg = QuadConfig::default();
        let d = parse_measure("density(\"1\", rate=1)", 1).unwrap();
        let g = parse_measure("gaussian(1)", 1).unwrap();
        let z = [c(0.3, -0.2)];
        let a = d.gaussian_integral(1.0, &z, &cfg, &|_| c(1.0, 0.0)).unwrap();
        let b = g.gaussian_integral(1.0, &z, &cfg, &|_| c(1.0, 0.0)).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn density_expression_values() {
        let m = parse_measure("density(\"x^2 + 2*y\", im=\"x*y\", rate=0.5, center=[1])", 1).unwrap();
        match m {
            MeasureSpec::Density(d) => {
                assert!(!d.real_valued);
                let v = d.amplitude.eval(&[c(3.0, 0.5)]);
                assert!((v - c(10.0, 1.5)).norm() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
        let r = parse_real_measure("density(\"math::exp(-t1^2) * t2\")", 2).unwrap();
        match r {
            RealMeasure::Density(d) => {
                let v = d.amplitude.eval(&[1.0, 2.0]);
                assert!((v.re - 2.0 * (-1f64).exp()).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("gaussian(-1)", 0),
            ("dirac(1, 2)", 0),
            ("atoms([1]:1,", 12),
            ("lebesgue extra", 9),
            ("density(\"x +\")", 8),
            ("density(\"zz\")", 8),
            ("weighted(lebesgue, [0.3])", 19),
            ("blob", 0),
        ];
        for (s, pos) in cases {
            match parse_measure(s, 1) {
                Err(FockError::Parse { position, .. }) => assert_eq!(position, pos, "{s}"),
                other => panic!("{s}: {other:?}"),
            }
        }
    }
}
