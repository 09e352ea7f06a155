//! First-order Sugeno neuro-fuzzy classifier.
//!
//! Four anomaly inputs pass through sigmoid membership functions; every
//! grid-partition rule (one membership function per input, all combinations)
//! fires with the product of its grades, firing strengths are normalized,
//! and each rule contributes a linear function of the inputs weighted by its
//! normalized strength. Training is hybrid: consequent coefficients are fit
//! in closed form by least squares, membership shapes by gradient descent —
//! see [`train`].

pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sigmoid membership function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    /// Steepness; negative values make the grade fall with x.
    pub premise_c: f64,
    /// Midpoint: the input value graded 0.5.
    pub premise_b: f64,
}

impl MembershipFunction {
    pub fn new(premise_c: f64, premise_b: f64) -> MembershipFunction {
        MembershipFunction {
            premise_c,
            premise_b,
        }
    }

    /// Membership grade in (0,1).
    pub fn grade(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.premise_c * (x - self.premise_b)).exp())
    }
}

/// One labeled observation: anomaly inputs and the class target.
///
/// In the authentication pipeline the inputs are (foreground score, its
/// distance from reference, background score, its distance from reference)
/// and the target is +1 legitimate / 0 suspicious / −1 adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub inputs: Vec<f64>,
    pub target: f64,
}

impl TrainingSample {
    pub fn new(inputs: Vec<f64>, target: f64) -> TrainingSample {
        TrainingSample { inputs, target }
    }
}

/// Everything the forward pass produces for one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// The threat level: a convex combination of per-rule linear outputs.
    pub output: f64,
    /// Raw firing strength per rule.
    pub firing: Vec<f64>,
    /// Normalized firing strengths; they sum to 1.
    pub normalized: Vec<f64>,
}

/// A complete grid-partition Sugeno model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnfisModel {
    n_inputs: usize,
    mfs_per_input: usize,
    /// `mfs[input][index]`.
    mfs: Vec<Vec<MembershipFunction>>,
    /// `rules[rule][input]` → membership-function index; all combinations.
    rules: Vec<Vec<usize>>,
    /// `consequents[rule]` = n_inputs coefficients then a constant term.
    consequents: Vec<Vec<f64>>,
}

fn grid_rules(n_inputs: usize, m: usize) -> Vec<Vec<usize>> {
    let count = m.pow(n_inputs as u32);
    (0..count)
        .map(|r| {
            (0..n_inputs)
                .map(|k| (r / m.pow((n_inputs - 1 - k) as u32)) % m)
                .collect()
        })
        .collect()
}

impl AnfisModel {
    /// Build a model from explicit membership banks; consequents start at 0.
    pub fn new(mfs: Vec<Vec<MembershipFunction>>) -> Result<AnfisModel> {
        let n_inputs = mfs.len();
        if n_inputs == 0 {
            return Err(Error::Config("model needs at least one input".into()));
        }
        let m = mfs[0].len();
        if m == 0 || mfs.iter().any(|bank| bank.len() != m) {
            return Err(Error::Config(
                "every input needs the same nonzero number of membership functions".into(),
            ));
        }
        if mfs
            .iter()
            .flatten()
            .any(|mf| !mf.premise_c.is_finite() || mf.premise_c == 0.0 || !mf.premise_b.is_finite())
        {
            return Err(Error::Config(
                "membership steepness must be finite and nonzero".into(),
            ));
        }
        let rules = grid_rules(n_inputs, m);
        let consequents = vec![vec![0.0; n_inputs + 1]; rules.len()];
        Ok(AnfisModel {
            n_inputs,
            mfs_per_input: m,
            mfs,
            rules,
            consequents,
        })
    }

    /// Data-scaled initialization: per input, membership midpoints sit at
    /// spread percentiles of the training values (25th/75th for two
    /// functions per input) and steepness is 4/IQR, signed so the first
    /// functions grade low values high and the last ones grade high values
    /// high.
    pub fn init_from_data(
        n_inputs: usize,
        mfs_per_input: usize,
        samples: &[TrainingSample],
    ) -> Result<AnfisModel> {
        if samples.is_empty() {
            return Err(Error::Dataset(
                "cannot initialize a model from an empty dataset".into(),
            ));
        }
        if samples
            .iter()
            .any(|s| s.inputs.len() != n_inputs || s.inputs.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Dataset(
                "every sample needs exactly n_inputs finite values".into(),
            ));
        }
        let m = mfs_per_input;
        let mut mfs = Vec::with_capacity(n_inputs);
        for k in 0..n_inputs {
            let mut values: Vec<f64> = samples.iter().map(|s| s.inputs[k]).collect();
            values.sort_by(f64::total_cmp);
            let q25 = quantile(&values, 0.25);
            let q75 = quantile(&values, 0.75);
            let iqr = q75 - q25;
            let steepness = if iqr > 1e-9 { 4.0 / iqr } else { 1.0 };
            let bank = (0..m)
                .map(|i| {
                    let q = if m == 2 {
                        if i == 0 {
                            0.25
                        } else {
                            0.75
                        }
                    } else {
                        (i + 1) as f64 / (m + 1) as f64
                    };
                    let sign = if i < m / 2 { -1.0 } else { 1.0 };
                    MembershipFunction::new(sign * steepness, quantile(&values, q))
                })
                .collect();
            mfs.push(bank);
        }
        AnfisModel::new(mfs)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn mfs_per_input(&self) -> usize {
        self.mfs_per_input
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn mfs(&self) -> &[Vec<MembershipFunction>] {
        &self.mfs
    }

    pub fn rules(&self) -> &[Vec<usize>] {
        &self.rules
    }

    pub fn consequents(&self) -> &[Vec<f64>] {
        &self.consequents
    }

    pub(crate) fn mfs_mut(&mut self) -> &mut Vec<Vec<MembershipFunction>> {
        &mut self.mfs
    }

    pub(crate) fn set_consequents(&mut self, consequents: Vec<Vec<f64>>) {
        debug_assert_eq!(consequents.len(), self.rules.len());
        self.consequents = consequents;
    }

    /// The rule's linear output p·x₁ + q·x₂ + … + r.
    pub fn rule_output(&self, rule: usize, inputs: &[f64]) -> f64 {
        let coeffs = &self.consequents[rule];
        inputs.iter().zip(coeffs).map(|(x, c)| x * c).sum::<f64>() + coeffs[self.n_inputs]
    }

    /// Full five-layer forward pass.
    pub fn forward(&self, inputs: &[f64]) -> Result<ForwardPass> {
        if inputs.len() != self.n_inputs {
            return Err(Error::Config(format!(
                "expected {} inputs, got {}",
                self.n_inputs,
                inputs.len()
            )));
        }
        let grades: Vec<Vec<f64>> = (0..self.n_inputs)
            .map(|k| self.mfs[k].iter().map(|mf| mf.grade(inputs[k])).collect())
            .collect();
        let firing: Vec<f64> = self
            .rules
            .iter()
            .map(|rule| {
                rule.iter()
                    .enumerate()
                    .map(|(k, &m)| grades[k][m])
                    .product()
            })
            .collect();
        let total: f64 = firing.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateInput);
        }
        let normalized: Vec<f64> = firing.iter().map(|w| w / total).collect();
        let output = normalized
            .iter()
            .enumerate()
            .map(|(r, wn)| wn * self.rule_output(r, inputs))
            .sum();
        Ok(ForwardPass {
            output,
            firing,
            normalized,
        })
    }

    /// The threat level alone.
    pub fn predict(&self, inputs: &[f64]) -> Result<f64> {
        Ok(self.forward(inputs)?.output)
    }

    /// Serialize to the versioned flat text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("anfis-model v1\n");
        out.push_str(&format!(
            "n_inputs={} mfs_per_input={}\n",
            self.n_inputs, self.mfs_per_input
        ));
        for (k, bank) in self.mfs.iter().enumerate() {
            for (i, mf) in bank.iter().enumerate() {
                out.push_str(&format!(
                    "mf input={k} index={i} c={} b={}\n",
                    mf.premise_c, mf.premise_b
                ));
            }
        }
        for (r, coeffs) in self.consequents.iter().enumerate() {
            let joined: Vec<String> = coeffs.iter().map(f64::to_string).collect();
            out.push_str(&format!("rule index={r} coeffs={}\n", joined.join(",")));
        }
        out
    }

    /// Parse the flat text format produced by [`AnfisModel::to_text`].
    pub fn from_text(text: &str) -> Result<AnfisModel> {
        let bad = |msg: String| Error::ModelFormat(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some("anfis-model v1") => {}
            other => return Err(bad(format!("unsupported model header {other:?}"))),
        }
        let dims = lines
            .next()
            .ok_or_else(|| bad("missing dimensions line".into()))?;
        let mut n_inputs = None;
        let mut m = None;
        for field in dims.split(' ') {
            match field.split_once('=') {
                Some(("n_inputs", v)) => n_inputs = v.parse::<usize>().ok(),
                Some(("mfs_per_input", v)) => m = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unexpected dimension field {field:?}"))),
            }
        }
        let (n_inputs, m) = match (n_inputs, m) {
            (Some(n), Some(m)) if n > 0 && m > 0 => (n, m),
            _ => {
                return Err(bad(
                    "dimensions line needs positive n_inputs and mfs_per_input".into(),
                ))
            }
        };

        let mut mfs = vec![vec![MembershipFunction::new(1.0, 0.0); m]; n_inputs];
        for _ in 0..n_inputs * m {
            let line = lines
                .next()
                .ok_or_else(|| bad("missing membership line".into()))?;
            let rest = line
                .strip_prefix("mf ")
                .ok_or_else(|| bad(format!("expected mf line, got {line:?}")))?;
            let mut input = None;
            let mut index = None;
            let mut c = None;
            let mut b = None;
            for field in rest.split(' ') {
                match field.split_once('=') {
                    Some(("input", v)) => input = v.parse::<usize>().ok(),
                    Some(("index", v)) => index = v.parse::<usize>().ok(),
                    Some(("c", v)) => c = v.parse::<f64>().ok(),
                    Some(("b", v)) => b = v.parse::<f64>().ok(),
                    _ => return Err(bad(format!("unexpected mf field {field:?}"))),
                }
            }
            match (input, index, c, b) {
                (Some(k), Some(i), Some(c), Some(b)) if k < n_inputs && i < m => {
                    mfs[k][i] = MembershipFunction::new(c, b)
                }
                _ => return Err(bad(format!("malformed mf line {line:?}"))),
            }
        }

        let mut model = AnfisModel::new(mfs)?;
        let mut consequents = vec![vec![0.0; n_inputs + 1]; model.rule_count()];
        for _ in 0..model.rule_count() {
            let line = lines
                .next()
                .ok_or_else(|| bad("missing rule line".into()))?;
            let rest = line
                .strip_prefix("rule ")
                .ok_or_else(|| bad(format!("expected rule line, got {line:?}")))?;
            let mut index = None;
            let mut coeffs = None;
            for field in rest.split(' ') {
                match field.split_once('=') {
                    Some(("index", v)) => index = v.parse::<usize>().ok(),
                    Some(("coeffs", v)) => {
                        coeffs = v
                            .split(',')
                            .map(|x| x.parse::<f64>().ok())
                            .collect::<Option<Vec<f64>>>()
                    }
                    _ => return Err(bad(format!("unexpected rule field {field:?}"))),
                }
            }
            match (index, coeffs) {
                (Some(r), Some(cs)) if r < consequents.len() && cs.len() == n_inputs + 1 => {
                    consequents[r] = cs
                }
                _ => return Err(bad(format!("malformed rule line {line:?}"))),
            }
        }
        if let Some(extra) = lines.next() {
            return Err(bad(format!("trailing content after model body: {extra:?}")));
        }
        model.set_consequents(consequents);
        Ok(model)
    }
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
