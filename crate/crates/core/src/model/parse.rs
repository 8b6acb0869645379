//! Reader and writer for the `.pomdp` text format (a subset of Cassandra's).
//!
//! Supported: the `discount`, `values`, `states`, `actions` and
//! `observations` header lines; `T` and `O` stanzas in element, row and
//! matrix form (matrices may also be `identity` or `uniform`); and `R` in the
//! full `R: a : s : s' : o r` form. `*` is accepted in any index position.
//! Anything else is rejected with a position.

use std::fmt::Write as _;

use super::{Labels, ModelError, Pomdp};

const KEYWORDS: &[&str] = &[
    "discount",
    "values",
    "states",
    "actions",
    "observations",
    "start",
    "T",
    "O",
    "R",
];

/// Upper bound on the scratch table used to collapse `R(a, s, s', o)`.
const MAX_REWARD_SCRATCH: usize = 1 << 26;

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut start: Option<usize> = None;
        let push = |from: usize, to: usize, tokens: &mut Vec<Token>| {
            tokens.push(Token {
                text: line[from..to].to_string(),
                line: lineno + 1,
                column: from + 1,
            })
        };
        for (i, c) in line.char_indices() {
            if c.is_whitespace() || c == ':' {
                if let Some(s) = start.take() {
                    push(s, i, &mut tokens);
                }
                if c == ':' {
                    push(i, i + 1, &mut tokens);
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            push(s, line.len(), &mut tokens);
        }
    }
    tokens
}

#[derive(Debug, Clone)]
struct Space {
    count: usize,
    names: Option<Vec<String>>,
}

impl Space {
    fn lookup(&self, token: &str) -> Option<Vec<usize>> {
        if token == "*" {
            return Some((0..self.count).collect());
        }
        if let Some(names) = &self.names {
            if let Some(i) = names.iter().position(|n| n == token) {
                return Some(vec![i]);
            }
        }
        match token.parse::<usize>() {
            Ok(i) if i < self.count => Some(vec![i]),
            _ => None,
        }
    }
}

struct Tables {
    states: usize,
    actions: usize,
    observations: usize,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Option<Vec<f64>>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    discount: Option<f64>,
    states: Option<Space>,
    actions: Option<Space>,
    observations: Option<Space>,
    tables: Option<Tables>,
}

impl Parser {
    fn error_at(&self, index: usize, message: impl Into<String>) -> ModelError {
        let (line, column) = match self.tokens.get(index).or(self.tokens.last()) {
            Some(t) => (t.line, t.column),
            None => (1, 1),
        };
        ModelError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        self.error_at(self.pos, message)
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn next(&mut self) -> Result<String, ModelError> {
        let tok = self
            .tokens
            .get(self.pos)
            .map(|t| t.text.clone())
            .ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect_colon(&mut self) -> Result<(), ModelError> {
        match self.peek() {
            Some(":") => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("expected ':'")),
        }
    }

    fn at_declaration(&self, index: usize) -> bool {
        matches!(
            (self.tokens.get(index), self.tokens.get(index + 1)),
            (Some(k), Some(c)) if KEYWORDS.contains(&k.text.as_str()) && c.text == ":"
        )
    }

    fn number(&mut self) -> Result<f64, ModelError> {
        let at = self.pos;
        let tok = self.next()?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error_at(at, format!("expected a number, found '{tok}'"))),
        }
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>, ModelError> {
        (0..count).map(|_| self.number()).collect()
    }

    fn index(&mut self, space: &Space, what: &str) -> Result<Vec<usize>, ModelError> {
        let at = self.pos;
        let tok = self.next()?;
        space
            .lookup(&tok)
            .ok_or_else(|| self.error_at(at, format!("unknown {what} '{tok}'")))
    }

    fn space(&mut self) -> Result<Space, ModelError> {
        let at = self.pos;
        let first = self.next()?;
        if let Ok(count) = first.parse::<usize>() {
            if count == 0 {
                return Err(self.error_at(at, "count must be positive"));
            }
            return Ok(Space { count, names: None });
        }
        let mut names = vec![first];
        while self.pos < self.tokens.len() && !self.at_declaration(self.pos) {
            let name = self.next()?;
            if name == ":" {
                return Err(self.error_at(self.pos - 1, "unexpected ':' in name list"));
            }
            names.push(name);
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(self.error_at(at, format!("duplicate name '{n}'")));
            }
        }
        Ok(Space {
            count: names.len(),
            names: Some(names),
        })
    }

    fn spaces(&self) -> Result<(Space, Space, Space), ModelError> {
        match (&self.states, &self.actions, &self.observations) {
            (Some(s), Some(a), Some(o)) => Ok((s.clone(), a.clone(), o.clone())),
            _ => Err(self.error(
                "states, actions and observations must be declared before any T, O or R stanza",
            )),
        }
    }

    fn tables(&mut self) -> Result<&mut Tables, ModelError> {
        if self.tables.is_none() {
            let (s, a, o) = self.spaces()?;
            self.tables = Some(Tables {
                states: s.count,
                actions: a.count,
                observations: o.count,
                transition: vec![0.0; a.count * s.count * s.count],
                observation: vec![0.0; a.count * s.count * o.count],
                reward: None,
            });
        }
        Ok(self.tables.as_mut().expect("initialized above"))
    }

    fn parse(mut self) -> Result<Pomdp, ModelError> {
        while self.pos < self.tokens.len() {
            if !self.at_declaration(self.pos) {
                return Err(self.error(format!(
                    "expected a declaration, found '{}'",
                    self.tokens[self.pos].text
                )));
            }
            let keyword = self.next()?;
            self.expect_colon()?;
            let header = !matches!(keyword.as_str(), "T" | "O" | "R");
            if header && self.tables.is_some() {
                return Err(self.error_at(
                    self.pos - 2,
                    format!("'{keyword}' must appear before the T, O and R stanzas"),
                ));
            }
            match keyword.as_str() {
                "discount" => self.discount = Some(self.number()?),
                "values" => {
                    let at = self.pos;
                    let kind = self.next()?;
                    if kind != "reward" {
                        return Err(self.error_at(at, format!("unsupported values type '{kind}'")));
                    }
                }
                "states" => self.states = Some(self.space()?),
                "actions" => self.actions = Some(self.space()?),
                "observations" => self.observations = Some(self.space()?),
                "T" => self.transition_stanza()?,
                "O" => self.observation_stanza()?,
                "R" => self.reward_stanza()?,
                other => {
                    return Err(
                        self.error_at(self.pos - 2, format!("unsupported declaration '{other}'"))
                    )
                }
            }
        }
        self.finish()
    }

    fn transition_stanza(&mut self) -> Result<(), ModelError> {
        let (states, actions, _) = self.spaces()?;
        let n = states.count;
        let acts = self.index(&actions, "action")?;
        if self.peek() == Some(":") {
            self.pos += 1;
            let starts = self.index(&states, "state")?;
            if self.peek() == Some(":") {
                self.pos += 1;
                let ends = self.index(&states, "state")?;
                let p = self.number()?;
                let t = self.tables()?;
                for &a in &acts {
                    for &s in &starts {
                        for &e in &ends {
                            t.transition[(a * n + s) * n + e] = p;
                        }
                    }
                }
            } else {
                let row = self.row(n)?;
                let t = self.tables()?;
                for &a in &acts {
                    for &s in &starts {
                        t.transition[(a * n + s) * n..(a * n + s + 1) * n].copy_from_slice(&row);
                    }
                }
            }
        } else {
            let matrix = self.matrix(n, n, true)?;
            let t = self.tables()?;
            for &a in &acts {
                t.transition[a * n * n..(a + 1) * n * n].copy_from_slice(&matrix);
            }
        }
        Ok(())
    }

    fn observation_stanza(&mut self) -> Result<(), ModelError> {
        let (states, actions, observations) = self.spaces()?;
        let (n, z) = (states.count, observations.count);
        let acts = self.index(&actions, "action")?;
        if self.peek() == Some(":") {
            self.pos += 1;
            let ends = self.index(&states, "state")?;
            if self.peek() == Some(":") {
                self.pos += 1;
                let obs = self.index(&observations, "observation")?;
                let p = self.number()?;
                let t = self.tables()?;
                for &a in &acts {
                    for &e in &ends {
                        for &o in &obs {
                            t.observation[(a * n + e) * z + o] = p;
                        }
                    }
                }
            } else {
                let row = self.row(z)?;
                let t = self.tables()?;
                for &a in &acts {
                    for &e in &ends {
                        t.observation[(a * n + e) * z..(a * n + e + 1) * z].copy_from_slice(&row);
                    }
                }
            }
        } else {
            let matrix = self.matrix(n, z, false)?;
            let t = self.tables()?;
            for &a in &acts {
                t.observation[a * n * z..(a + 1) * n * z].copy_from_slice(&matrix);
            }
        }
        Ok(())
    }

    fn reward_stanza(&mut self) -> Result<(), ModelError> {
        let (states, actions, observations) = self.spaces()?;
        let (n, z) = (states.count, observations.count);
        let acts = self.index(&actions, "action")?;
        let mut idx = vec![acts];
        for (space, what) in [
            (&states, "state"),
            (&states, "state"),
            (&observations, "observation"),
        ] {
            if self.peek() != Some(":") {
                return Err(self.error(
                    "only the full 'R: <a> : <s> : <s'> : <o> <value>' reward form is supported",
                ));
            }
            self.pos += 1;
            idx.push(self.index(space, what)?);
        }
        let value = self.number()?;
        let t = self.tables()?;
        let size = t.actions * n * n * z;
        if size > MAX_REWARD_SCRATCH {
            return Err(ModelError::Dimension(format!(
                "reward table with {size} entries is too large"
            )));
        }
        let r = t.reward.get_or_insert_with(|| vec![0.0; size]);
        for &a in &idx[0] {
            for &s in &idx[1] {
                for &e in &idx[2] {
                    for &o in &idx[3] {
                        r[((a * n + s) * n + e) * z + o] = value;
                    }
                }
            }
        }
        Ok(())
    }

    fn row(&mut self, width: usize) -> Result<Vec<f64>, ModelError> {
        if self.peek() == Some("uniform") {
            self.pos += 1;
            return Ok(vec![1.0 / width as f64; width]);
        }
        self.numbers(width)
    }

    fn matrix(
        &mut self,
        rows: usize,
        cols: usize,
        allow_identity: bool,
    ) -> Result<Vec<f64>, ModelError> {
        match self.peek() {
            Some("uniform") => {
                self.pos += 1;
                Ok(vec![1.0 / cols as f64; rows * cols])
            }
            Some("identity") if allow_identity => {
                self.pos += 1;
                let mut m = vec![0.0; rows * cols];
                for i in 0..rows {
                    m[i * cols + i] = 1.0;
                }
                Ok(m)
            }
            Some("identity") => Err(self.error("'identity' is only valid for T matrices")),
            _ => self.numbers(rows * cols),
        }
    }

    fn finish(self) -> Result<Pomdp, ModelError> {
        let discount = self
            .discount
            .ok_or_else(|| self.error("missing 'discount' declaration"))?;
        let (states, actions, observations) = self.spaces()?;
        let t = match self.tables {
            Some(t) => t,
            None => {
                return Err(self.error("model has no T or O stanzas"));
            }
        };
        let (n, na, z) = (t.states, t.actions, t.observations);
        // Validate before collapsing so that errors name the offending row.
        let probe = Pomdp::new(
            n,
            na,
            z,
            t.transition.clone(),
            t.observation.clone(),
            vec![0.0; n * na],
            discount,
        )?;
        let mut reward = vec![0.0; n * na];
        if let Some(r4) = &t.reward {
            for a in 0..na {
                for s in 0..n {
                    let block = &r4[(a * n + s) * n * z..(a * n + s + 1) * n * z];
                    if block.iter().all(|&v| v == block[0]) {
                        reward[s * na + a] = block[0];
                        continue;
                    }
                    let mut acc = 0.0;
                    for e in 0..n {
                        let p = probe.transition(s, a, e);
                        if p == 0.0 {
                            continue;
                        }
                        let base = ((a * n + s) * n + e) * z;
                        let inner: f64 = (0..z)
                            .map(|o| probe.observation(a, e, o) * r4[base + o])
                            .sum();
                        acc += p * inner;
                    }
                    reward[s * na + a] = acc;
                }
            }
        }
        Pomdp::new(n, na, z, t.transition, t.observation, reward, discount)?.with_labels(Labels {
            states: states.names,
            actions: actions.names,
            observations: observations.names,
        })
    }
}

/// Parses a model from `.pomdp` text.
pub fn parse_pomdp(text: &str) -> Result<Pomdp, ModelError> {
    Parser {
        tokens: tokenize(text),
        pos: 0,
        discount: None,
        states: None,
        actions: None,
        observations: None,
        tables: None,
    }
    .parse()
}

/// Serializes a model; `parse_pomdp(&write_pomdp(m))` reproduces `m`.
pub fn write_pomdp(model: &Pomdp) -> String {
    let mut out = String::new();
    let labels = model.labels();
    let space = |names: &Option<Vec<String>>, count: usize| match names {
        Some(n) => n.join(" "),
        None => count.to_string(),
    };
    let join = |row: &[f64]| {
        row.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "discount: {}", model.discount());
    let _ = writeln!(out, "values: reward");
    let _ = writeln!(
        out,
        "states: {}",
        space(&labels.states, model.num_states())
    );
    let _ = writeln!(
        out,
        "actions: {}",
        space(&labels.actions, model.num_actions())
    );
    let _ = writeln!(
        out,
        "observations: {}",
        space(&labels.observations, model.num_observations())
    );
    for a in 0..model.num_actions() {
        let _ = writeln!(out, "\nT: {a}");
        for s in 0..model.num_states() {
            let _ = writeln!(out, "{}", join(model.transition_row(a, s)));
        }
    }
    for a in 0..model.num_actions() {
        let _ = writeln!(out, "\nO: {a}");
        for s in 0..model.num_states() {
            let _ = writeln!(out, "{}", join(model.observation_row(a, s)));
        }
    }
    out.push('\n');
    for a in 0..model.num_actions() {
        for s in 0..model.num_states() {
            let _ = writeln!(out, "R: {a} : {s} : * : * {}", model.reward(s, a));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "discount: 0.5\nvalues: reward\nstates: 2\nactions: 1\nobservations: 1\n\
                           T: 0\nidentity\nO: 0\nuniform\nR: 0 : 1 : * : * 3\n";

    #[test]
    fn tiger_fixture_dimensions() {
        let m = parse_pomdp(crate::fixtures::TIGER).unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.num_observations()),
            (2, 3, 2)
        );
        assert_eq!(m.discount(), 0.95);
        assert_eq!(m.reward_vector(1), vec![-100.0, 10.0]);
        assert_eq!(m.reward_vector(0), vec![-1.0, -1.0]);
        assert_eq!(m.observation(0, 0, 0), 0.85);
        assert_eq!(
            m.labels().actions.as_deref(),
            Some(&["listen".to_string(), "open-left".into(), "open-right".into()][..])
        );
    }

    #[test]
    fn minimal_round_trip() {
        let m = parse_pomdp(MINIMAL).unwrap();
        assert_eq!(m.reward(1, 0), 3.0);
        assert_eq!(m.transition(0, 0, 0), 1.0);
        let again = parse_pomdp(&write_pomdp(&m)).unwrap();
        assert_eq!(m, again);
        let tiger = parse_pomdp(crate::fixtures::TIGER).unwrap();
        assert_eq!(parse_pomdp(&write_pomdp(&tiger)).unwrap(), tiger);
    }

    #[test]
    fn element_and_row_forms() {
        let text = "discount: 0.9\nvalues: reward\nstates: a b\nactions: go\nobservations: x y\n\
                    T: go : a : b 1.0\nT: go : b\n0.25 0.75\n\
                    O: * : * : x 0.5\nO: go : b : y 0.5\nO: go : a\n0.5 0.5\n";
        let m = parse_pomdp(text).unwrap();
        assert_eq!(m.transition_row(0, 0), &[0.0, 1.0]);
        assert_eq!(m.transition_row(0, 1), &[0.25, 0.75]);
        assert_eq!(m.observation_row(0, 1), &[0.5, 0.5]);
    }

    #[test]
    fn rewards_collapse_by_expectation() {
        // Reward depends on the arrival state and observation only.
        let text = "discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\nobservations: 2\n\
                    T: 0\n0.25 0.75\n0.5 0.5\nO: 0\n1 0\n0.5 0.5\n\
                    R: 0 : * : 1 : 0 8\nR: 0 : * : 0 : * 4\n";
        let m = parse_pomdp(text).unwrap();
        // state 0: 0.25*4 + 0.75*(0.5*8) = 4
        assert!((m.reward(0, 0) - 4.0).abs() < 1e-12);
        // state 1: 0.5*4 + 0.5*(0.5*8) = 4
        assert!((m.reward(1, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn substochastic_row_is_named() {
        let text = MINIMAL.replace("identity", "0.9 0\n0 1");
        match parse_pomdp(&text).unwrap_err() {
            ModelError::NotStochastic {
                table, row, sum, ..
            } => {
                assert_eq!(table, "T");
                assert_eq!(row, 0);
                assert!((sum - 0.9).abs() < 1e-12);
            }
            e => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_pomdp("discount: 0.5\nstates: 2\nbogus here\n").unwrap_err();
        assert!(matches!(err, ModelError::Syntax { line: 3, column: 1, .. }));
        let err = parse_pomdp(&MINIMAL.replace("identity", "1 0 zero 1")).unwrap_err();
        assert!(matches!(err, ModelError::Syntax { line: 7, column: 5, .. }));
    }

    #[test]
    fn unsupported_constructs_are_rejected() {
        let start = MINIMAL.replace("values: reward", "values: reward\nstart: uniform");
        assert!(matches!(
            parse_pomdp(&start),
            Err(ModelError::Syntax { .. })
        ));
        let cost = MINIMAL.replace("values: reward", "values: cost");
        assert!(parse_pomdp(&cost).is_err());
        let short_reward = MINIMAL.replace("R: 0 : 1 : * : * 3", "R: 0 : 1\n3 3");
        assert!(parse_pomdp(&short_reward).is_err());
    }

    #[test]
    fn discount_out_of_range() {
        let text = MINIMAL.replace("discount: 0.5", "discount: 1.5");
        assert_eq!(parse_pomdp(&text).unwrap_err(), ModelError::Discount(1.5));
    }

    #[test]
    fn body_before_header_is_an_error() {
        let text = "discount: 0.5\nT: 0\nidentity\n";
        assert!(parse_pomdp(text).is_err());
    }
}
