//! Text form of gain expressions.
//!
//! ```text
//! expr  := term ('+' term)*
//! term  := '0'
//!        | NUM '*' 's' ['^' NUM]
//!        | NUM '*' 's' '/' '(' '1' '+' 's' ')'
//!        | NUM '*' 'sqrt' '(' 's' ')'
//!        | NUM '*' 'atan' '(' 's' ')'
//!        | 'max' '(' expr (',' expr)* ')'
//!        | 'id' '+' '(' expr ')'
//!        | '(' expr ')' ('o' '(' expr ')')*
//! ```
//!
//! Coefficients and exponents must be positive, so every accepted text is a
//! class-K function (or zero). Whitespace is ignored.

use crate::gain::GainExpr;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("parse error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("not a class-K gain at position {pos}: {msg}")]
    RejectedNotClassK { pos: usize, msg: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::RejectedNotClassK { pos, .. } => *pos,
        }
    }
}

pub fn parse_gain<T: Scalar>(text: &str) -> Result<GainExpr<T>, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.syntax("empty gain expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

/// Canonical text; `parse_gain(&format_gain(g)) == g` for trees whose sums
/// have at least two terms.
pub fn format_gain<T: Scalar>(g: &GainExpr<T>) -> String {
    let mut out = String::new();
    write_expr(g, &mut out);
    out
}

fn write_expr<T: Scalar>(g: &GainExpr<T>, out: &mut String) {
    use std::fmt::Write;
    match g {
        GainExpr::Zero => out.push('0'),
        GainExpr::Linear(c) => {
            let _ = write!(out, "{c}*s");
        }
        GainExpr::Power { coeff, exponent } => {
            let _ = write!(out, "{coeff}*s^{exponent}");
        }
        GainExpr::Saturating(c) => {
            let _ = write!(out, "{c}*s/(1+s)");
        }
        GainExpr::Atan(c) => {
            let _ = write!(out, "{c}*atan(s)");
        }
        GainExpr::Sum(ch) => {
            for (k, c) in ch.iter().enumerate() {
                if k > 0 {
                    out.push('+');
                }
                if matches!(c, GainExpr::Sum(_)) {
                    out.push('(');
                    write_expr(c, out);
                    out.push(')');
                } else {
                    write_expr(c, out);
                }
            }
        }
        GainExpr::Max(ch) => {
            out.push_str("max(");
            for (k, c) in ch.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_expr(c, out);
            }
            out.push(')');
        }
        GainExpr::Compose(o, i) => {
            out.push('(');
            write_expr(o, out);
            out.push_str(")o(");
            write_expr(i, out);
            out.push(')');
        }
        GainExpr::PlusId(i) => {
            out.push_str("id+(");
            write_expr(i, out);
            out.push(')');
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", c as char)))
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(w.as_bytes()) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{w}'")))
        }
    }

    fn expr<T: Scalar>(&mut self) -> Result<GainExpr<T>, ParseError> {
        let first = self.term()?;
        if self.peek() != Some(b'+') {
            return Ok(first);
        }
        let mut terms = vec![first];
        while self.eat(b'+') {
            terms.push(self.term()?);
        }
        Ok(GainExpr::Sum(terms))
    }

    fn term<T: Scalar>(&mut self) -> Result<GainExpr<T>, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let mut e = self.expr()?;
                self.expect(b')')?;
                while self.peek() == Some(b'o') {
                    self.pos += 1;
                    self.expect(b'(')?;
                    let inner = self.expr()?;
                    self.expect(b')')?;
                    e = GainExpr::compose(e, inner);
                }
                Ok(e)
            }
            Some(b'm') => {
                self.expect_word("max")?;
                self.expect(b'(')?;
                let mut ch = vec![self.expr()?];
                while self.eat(b',') {
                    ch.push(self.expr()?);
                }
                self.expect(b')')?;
                Ok(GainExpr::Max(ch))
            }
            Some(b'i') => {
                self.expect_word("id")?;
                self.expect(b'+')?;
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(GainExpr::plus_id(e))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.scaled_term(),
            Some(b'-') => {
                Err(ParseError::RejectedNotClassK { pos: self.pos, msg: "negative terms are not class K".into() })
            }
            Some(_) => Err(self.syntax("expected a gain term")),
        }
    }

    fn scaled_term<T: Scalar>(&mut self) -> Result<GainExpr<T>, ParseError> {
        let start = self.pos;
        let c: T = self.number()?;
        if self.peek() != Some(b'*') {
            if c == T::zero() {
                return Ok(GainExpr::Zero);
            }
            return Err(self.syntax("expected '*' after coefficient"));
        }
        if !(c > T::zero()) {
            return Err(ParseError::RejectedNotClassK { pos: start, msg: "coefficient must be positive".into() });
        }
        self.pos += 1;
        if self.eat_word("sqrt") {
            self.expect(b'(')?;
            self.expect(b's')?;
            self.expect(b')')?;
            return Ok(GainExpr::Power { coeff: c, exponent: T::lit(0.5) });
        }
        if self.eat_word("atan") {
            self.expect(b'(')?;
            self.expect(b's')?;
            self.expect(b')')?;
            return Ok(GainExpr::Atan(c));
        }
        self.expect(b's')?;
        if self.eat(b'^') {
            let at = self.pos;
            let p: T = self.number()?;
            if !(p > T::zero()) {
                return Err(ParseError::RejectedNotClassK { pos: at, msg: "exponent must be positive".into() });
            }
            return Ok(GainExpr::Power { coeff: c, exponent: p });
        }
        if self.eat(b'/') {
            self.expect(b'(')?;
            self.expect(b'1')?;
            self.expect(b'+')?;
            self.expect(b's')?;
            self.expect(b')')?;
            return Ok(GainExpr::Saturating(c));
        }
        Ok(GainExpr::Linear(c))
    }

    fn number<T: Scalar>(&mut self) -> Result<T, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.syntax("expected a number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        let v: T = text.parse().map_err(|_| self.syntax("malformed number"))?;
        if !v.is_finite() {
            return Err(ParseError::RejectedNotClassK { pos: start, msg: "number is not finite".into() });
        }
        self.pos = p;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type G = GainExpr<f64>;

    fn p(s: &str) -> G {
        parse_gain(s).unwrap()
    }

    #[test]
    fn parses_leaves() {
        assert_eq!(p("0.5*s"), G::linear(0.5));
        assert_eq!(p("2*sqrt(s)"), G::power(2.0, 0.5));
        assert_eq!(p("max(0.3*s, 1*s/(1+s))"), G::Max(vec![G::linear(0.3), G::saturating(1.0)]));
        assert_eq!(p(" 0 "), G::Zero);
        assert_eq!(p("1.5e-3*s^2"), G::power(1.5e-3, 2.0));
        assert_eq!(p("3*atan(s)"), G::atan(3.0));
    }

    #[test]
    fn parses_combinators() {
        assert_eq!(p("0.5*s + 1*s^2"), G::Sum(vec![G::linear(0.5), G::power(1.0, 2.0)]));
        assert_eq!(p("(2*s)o(1*sqrt(s))"), G::compose(G::linear(2.0), G::power(1.0, 0.5)));
        assert_eq!(p("id+(0.5*s)"), G::plus_id(G::linear(0.5)));
        assert_eq!(p("(1*s)o(2*s)o(3*s)"), G::compose(G::compose(G::linear(1.0), G::linear(2.0)), G::linear(3.0)));
        assert_eq!(p("(0.5*s)"), G::linear(0.5));
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_gain(&G::linear(0.5)), "0.5*s");
        assert_eq!(format_gain(&G::Zero), "0");
        assert_eq!(format_gain(&G::power(1.0, 2.0)), "1*s^2");
        assert_eq!(format_gain(&G::Max(vec![G::linear(0.3), G::saturating(1.0)])), "max(0.3*s,1*s/(1+s))");
    }

    #[test]
    fn reports_positions() {
        let e = parse_gain::<f64>("0.5*s +").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { pos: 7, .. }), "{e:?}");
        let e = parse_gain::<f64>("0.5*x").unwrap_err();
        assert_eq!(e.position(), 4);
        let e = parse_gain::<f64>("").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { .. }));
        let e = parse_gain::<f64>("1*s 2").unwrap_err();
        assert_eq!(e.position(), 4);
    }

    #[test]
    fn rejects_non_class_k() {
        assert!(matches!(parse_gain::<f64>("0*s"), Err(ParseError::RejectedNotClassK { .. })));
        assert!(matches!(parse_gain::<f64>("-1*s"), Err(ParseError::RejectedNotClassK { .. })));
        assert!(matches!(parse_gain::<f64>("1*s^0"), Err(ParseError::RejectedNotClassK { .. })));
        assert!(matches!(parse_gain::<f64>("1e999*s"), Err(ParseError::RejectedNotClassK { .. })));
        assert!(parse_gain::<f64>("1*s-2*s").is_err());
    }

    #[test]
    fn works_for_f32() {
        let g: GainExpr<f32> = parse_gain("0.1*s^1.5").unwrap();
        assert_eq!(parse_gain::<f32>(&format_gain(&g)).unwrap(), g);
    }

    pub(crate) fn arb_gain() -> impl Strategy<Value = G> {
        let coeff = prop_oneof![1e-6f64..1e3, (1u32..20).prop_map(|k| k as f64 * 0.25)];
        let leaf = prop_oneof![
            Just(G::Zero),
            coeff.clone().prop_map(G::Linear),
            (coeff.clone(), 0.05f64..5.0).prop_map(|(c, e)| G::Power { coeff: c, exponent: e }),
            coeff.clone().prop_map(G::Saturating),
            coeff.prop_map(G::Atan),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(G::Sum),
                prop::collection::vec(inner.clone(), 1..4).prop_map(G::Max),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| G::compose(a, b)),
                inner.prop_map(G::plus_id),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip(g in arb_gain()) {
            let text = format_gain(&g);
            let back: G = parse_gain(&text).unwrap();
            prop_assert_eq!(back, g);
        }
    }

    proptest! {
        #[test]
        fn parsed_gains_are_class_k(g in arb_gain(), a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let g: G = parse_gain(&format_gain(&g)).unwrap();
            prop_assert_eq!(g.eval(0.0), 0.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(g.eval(lo) <= g.eval(hi));
        }
    }
}
