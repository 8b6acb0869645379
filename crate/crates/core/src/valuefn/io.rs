//! Alpha file format:
//!
//! ```text
//! <num_vectors> <num_states>
//! <action>
//! <v_0> <v_1> ... <v_{n-1}>
//! ...
//! ```
//!
//! Blank lines between vectors are allowed. Values are written with 17
//! significant digits so files round-trip exactly.

use super::{AlphaSet, Horizon, Objective, ValueFnError};
use crate::numeric::fmt17;

pub fn write_alpha(set: &AlphaSet) -> String {
    let mut out = format!("{} {}\n", set.len(), set.num_states());
    for v in set.vectors() {
        out.push('\n');
        out.push_str(&v.action.to_string());
        out.push('\n');
        let row: Vec<String> = v.values.iter().map(|x| fmt17(*x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a maximizing set; see [`parse_alpha_with`].
pub fn parse_alpha(text: &str) -> Result<AlphaSet, ValueFnError> {
    parse_alpha_with(text, Objective::Maximize)
}

/// Reads an alpha file. The format carries no objective or horizon, so the
/// caller states the objective and the set is tagged stationary.
pub fn parse_alpha_with(text: &str, objective: Objective) -> Result<AlphaSet, ValueFnError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: String| ValueFnError::Format { line, message };
    let (line, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty alpha file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| err(line, format!("malformed count '{s}'")))
    };
    if dims.len() != 2 {
        return Err(err(line, "header must be '<num_vectors> <num_states>'".into()));
    }
    let (count, num_states) = (parse_count(dims[0])?, parse_count(dims[1])?);
    let mut vectors = Vec::with_capacity(count);
    for k in 0..count {
        let (line, action) = lines
            .next()
            .ok_or_else(|| err(line, format!("missing action line for vector {k}")))?;
        let action = action
            .parse::<usize>()
            .map_err(|_| err(line, format!("malformed action '{action}'")))?;
        let (line, row) = lines
            .next()
            .ok_or_else(|| err(line, format!("missing values for vector {k}")))?;
        let values = row
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("malformed number '{t}'")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != num_states {
            return Err(ValueFnError::Dimension(format!(
                "line {line}: {} values, expected {num_states}",
                values.len()
            )));
        }
        vectors.push((values, action));
    }
    if let Some((line, extra)) = lines.next() {
        return Err(err(line, format!("unexpected trailing content '{extra}'")));
    }
    AlphaSet::new(vectors, Horizon::Stationary, objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let set = AlphaSet::new(
            vec![
                (vec![0.1, -1.0 / 3.0, 1e-300], 2),
                (vec![7.0, 8.5, -2.25], 0),
            ],
            Horizon::Stationary,
            Objective::Maximize,
        )
        .unwrap();
        assert_eq!(parse_alpha(&write_alpha(&set)).unwrap(), set);
    }

    #[test]
    fn external_file() {
        let set = parse_alpha("2 2\n0\n1.5 2\n\n\n1\n-3 4e1\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get(1).values, vec![-3.0, 40.0]);
        assert_eq!(set.get(1).action, 1);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            parse_alpha("2 2\n0\n1 2\n1\n3\n"),
            Err(ValueFnError::Dimension(_))
        ));
        assert!(matches!(
            parse_alpha("1 2\n0\n1 x\n"),
            Err(ValueFnError::Format { line: 3, .. })
        ));
        assert!(parse_alpha("1 2\n0\n1 2\n0\n").is_err());
        assert!(parse_alpha("").is_err());
    }
}
