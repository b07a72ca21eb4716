use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

const QTABLE_HEADER: &str = "# vislearn-qtable v1";

/// Tabular action values with visit counts. Entries never written read as
/// `init`.
#[derive(Debug, Clone)]
pub struct QTable<S, A> {
    pub init: f64,
    values: HashMap<(S, A), f64>,
    visits: HashMap<(S, A), u64>,
}

impl<S: Eq + Hash, A: Eq + Hash> PartialEq for QTable<S, A> {
    fn eq(&self, other: &Self) -> bool {
        self.init == other.init && self.values == other.values && self.visits == other.visits
    }
}

impl<S, A> Default for QTable<S, A> {
    fn default() -> Self {
        Self { init: 0.0, values: HashMap::new(), visits: HashMap::new() }
    }
}

impl<S, A> QTable<S, A>
where
    S: Clone + Eq + Hash + Ord + Display + FromStr<Err = Error>,
    A: Copy + Eq + Hash + Ord + Display + FromStr<Err = Error>,
{
    pub fn new(init: f64) -> Self {
        Self { init, values: HashMap::new(), visits: HashMap::new() }
    }

    pub fn get(&self, s: &S, a: A) -> f64 {
        self.values.get(&(s.clone(), a)).copied().unwrap_or(self.init)
    }

    pub fn set(&mut self, s: S, a: A, v: f64) {
        self.values.insert((s, a), v);
    }

    pub fn visits(&self, s: &S, a: A) -> u64 {
        self.visits.get(&(s.clone(), a)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &S> {
        self.values.keys().map(|(s, _)| s)
    }

    /// Q(s,a) += alpha * (r + gamma * Q(s',a') - Q(s,a)); `next = None` marks
    /// a terminal transition.
    pub fn update(&mut self, s: &S, a: A, r: f64, next: Option<(&S, A)>, alpha: f64, gamma: f64) -> Result<()> {
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        let q_next = next.map_or(0.0, |(s2, a2)| self.get(s2, a2));
        let q = self.get(s, a);
        let v = q + alpha * (r + gamma * q_next - q);
        if !v.is_finite() {
            return Err(Error::NonFinite("action value"));
        }
        self.values.insert((s.clone(), a), v);
        *self.visits.entry((s.clone(), a)).or_default() += 1;
        Ok(())
    }

    /// Highest-valued legal action; ties go to the earliest in `legal`.
    pub fn greedy(&self, s: &S, legal: &[A]) -> Result<A> {
        let mut best: Option<(A, f64)> = None;
        for &a in legal {
            let v = self.get(s, a);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a).ok_or(Error::NoLegalActions)
    }

    /// Epsilon-greedy choice; with `epsilon == 0` no randomness is drawn.
    pub fn select<R: Rng + ?Sized>(&self, s: &S, legal: &[A], epsilon: f64, rng: &mut R) -> Result<A> {
        if legal.is_empty() {
            return Err(Error::NoLegalActions);
        }
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            return Ok(legal[rng.random_range(0..legal.len())]);
        }
        self.greedy(s, legal)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{QTABLE_HEADER}")?;
        writeln!(out, "init\t{}", self.init)?;
        let mut keys: Vec<&(S, A)> = self.values.keys().collect();
        keys.sort();
        for k in keys {
            writeln!(out, "{}\t{}\t{}\t{}", k.0, k.1, self.values[k], self.visits.get(k).copied().unwrap_or(0))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut table = Self::new(0.0);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |reason: String| Error::Format { line: lineno, reason };
            if i == 0 {
                if line.trim() != QTABLE_HEADER {
                    return Err(bad("missing q-table header".into()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[..] {
                ["init", v] => table.init = v.parse().map_err(|_| bad("bad init".into()))?,
                [s, a, v, n] => {
                    let s: S = s.parse().map_err(|e: Error| bad(e.to_string()))?;
                    let a: A = a.parse().map_err(|e: Error| bad(e.to_string()))?;
                    let v: f64 = v.parse().map_err(|_| bad("bad value".into()))?;
                    if !v.is_finite() {
                        return Err(bad("non-finite value".into()));
                    }
                    let n: u64 = n.parse().map_err(|_| bad("bad visit count".into()))?;
                    table.values.insert((s.clone(), a), v);
                    if n > 0 {
                        table.visits.insert((s, a), n);
                    }
                }
                _ => return Err(bad("expected state, action, value, visits".into())),
            }
        }
        Ok(table)
    }
}

pub fn sarsa_update<S, A>(
    q: &mut QTable<S, A>,
    s: &S,
    a: A,
    r: f64,
    next: Option<(&S, A)>,
    alpha: f64,
    gamma: f64,
) -> Result<()>
where
    S: Clone + Eq + Hash + Ord + Display + FromStr<Err = Error>,
    A: Copy + Eq + Hash + Ord + Display + FromStr<Err = Error>,
{
    q.update(s, a, r, next, alpha, gamma)
}

pub fn select_action<S, A, R>(q: &QTable<S, A>, s: &S, legal: &[A], epsilon: f64, rng: &mut R) -> Result<A>
where
    S: Clone + Eq + Hash + Ord + Display + FromStr<Err = Error>,
    A: Copy + Eq + Hash + Ord + Display + FromStr<Err = Error>,
    R: Rng + ?Sized,
{
    q.select(s, legal, epsilon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::state::{DialogueState, LearnerAction, PreContext};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type DQ = QTable<DialogueState, LearnerAction>;

    fn s0() -> DialogueState {
        DialogueState { c_state: 0, s_state: 1, pre_da: None, pre_context: PreContext::None }
    }

    #[test]
    fn update_arithmetic() {
        let mut q = DQ::new(0.0);
        let a = LearnerAction::ALL[0];
        q.update(&s0(), a, 1.0, None, 0.5, 1.0).unwrap();
        assert_eq!(q.get(&s0(), a), 0.5);
        assert_eq!(q.visits(&s0(), a), 1);

        let mut q = DQ::new(0.0);
        q.set(s0(), a, 2.0);
        q.update(&s0(), a, 0.0, Some((&s0(), a)), 0.3, 1.0).unwrap();
        assert_eq!(q.get(&s0(), a), 2.0);
        assert!(q.update(&s0(), a, f64::NAN, None, 0.3, 1.0).is_err());
    }

    #[test]
    fn greedy_ties_and_argmax() {
        let mut q = DQ::new(0.0);
        let legal = &LearnerAction::ALL[..4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(q.select(&s0(), legal, 0.0, &mut rng).unwrap(), legal[0]);
        q.set(s0(), legal[1], 0.1);
        assert_eq!(q.select(&s0(), legal, 0.0, &mut rng).unwrap(), legal[1]);
        assert!(q.select(&s0(), &[], 0.0, &mut rng).is_err());
    }

    #[test]
    fn uniform_exploration() {
        let q = DQ::new(0.0);
        let legal = &LearnerAction::ALL[..4];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let a = q.select(&s0(), legal, 1.0, &mut rng).unwrap();
            counts[legal.iter().position(|x| *x == a).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as i64 - 2500).abs() <= 130, "{counts:?}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut q = DQ::new(0.0);
        q.update(&s0(), LearnerAction::ALL[3], -5.5, None, 0.1, 1.0).unwrap();
        q.update(&s0(), LearnerAction::ALL[1], 1.0 / 3.0, None, 0.1, 1.0).unwrap();
        let text = q.to_text();
        let back = DQ::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, q);
        assert_eq!(back.to_text(), text);
        assert!(DQ::read_text("nope\n".as_bytes()).is_err());
    }
}
