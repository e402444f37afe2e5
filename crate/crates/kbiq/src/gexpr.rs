//! Parser for coefficient expressions like `e1`, `0.5*e3+2*e10` or
//! `0.6*e1-0.8*e3`: a signed sum of terms `c*e<k>` on the eigenbasis.

use crate::error::{Error, Result};
use crate::weights::CoefficientVector;

/// Parses a coefficient expression into a [`CoefficientVector`].
///
/// The literal `0` denotes the zero function.
pub fn parse_g_expr(input: &str) -> Result<CoefficientVector<f64>> {
    let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::InvalidParameter("empty g expression".into()));
    }
    if compact == "0" {
        return Ok(CoefficientVector::zero());
    }
    let mut coeffs: Vec<f64> = Vec::new();
    let mut rest = compact.as_str();
    let mut first = true;
    while !rest.is_empty() {
        let sign = if let Some(r) = rest.strip_prefix('+') {
            rest = r;
            1.0
        } else if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            -1.0
        } else if first {
            1.0
        } else {
            return Err(Error::InvalidParameter(format!(
                "expected '+' or '-' before '{rest}'"
            )));
        };
        first = false;
        let term_end = rest
            .char_indices()
            .find(|&(i, c)| i > 0 && (c == '+' || c == '-'))
            .map_or(rest.len(), |(i, _)| i);
        let term = &rest[..term_end];
        rest = &rest[term_end..];
        let (coeff, index) = parse_term(term)?;
        if coeffs.len() < index {
            coeffs.resize(index, 0.0);
        }
        coeffs[index - 1] += sign * coeff;
    }
    CoefficientVector::new(coeffs)
}

fn parse_term(term: &str) -> Result<(f64, usize)> {
    let bad = |msg: &str| Error::InvalidParameter(format!("bad term '{term}': {msg}"));
    let (coeff_str, basis) = match term.split_once('*') {
        Some((c, b)) => (Some(c), b),
        None => (None, term),
    };
    let index_str = basis
        .strip_prefix('e')
        .ok_or_else(|| bad("expected e<k>"))?;
    let index: usize = index_str
        .parse()
        .map_err(|_| bad("basis index is not an integer"))?;
    if index == 0 {
        return Err(bad("basis indices start at 1"));
    }
    let coeff = match coeff_str {
        Some(c) => c.parse().map_err(|_| bad("coefficient is not a number"))?,
        None => 1.0,
    };
    Ok((coeff, index))
}
