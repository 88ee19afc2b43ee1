//! Policy and value networks with hand-written reverse-mode gradients.

pub mod flat;
pub mod gaussian;
pub mod mlp;

use rand::Rng;
use rand_distr::StandardNormal;

pub use flat::{FlatParams, LayoutEntry};
pub use mlp::{Linear, Mlp, MlpTrace};

use crate::error::{Error, Result};
use gaussian::{LOG_STD_MAX, LOG_STD_MIN};

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

const POLICY: &str = "policy";
const VALUE: &str = "value";
const LOG_STD: &str = "policy.log_std";

fn layer_name(prefix: &str, index: usize, count: usize) -> String {
    if index + 1 == count {
        format!("{prefix}.head")
    } else {
        format!("{prefix}.layer{index}")
    }
}

fn mlp_layout(prefix: &str, net: &Mlp, out: &mut Vec<LayoutEntry>) {
    let count = net.layers.len();
    for (i, l) in net.layers.iter().enumerate() {
        let name = layer_name(prefix, i, count);
        out.push(LayoutEntry::new(format!("{name}.weight"), vec![l.out_dim, l.in_dim]));
        out.push(LayoutEntry::new(format!("{name}.bias"), vec![l.out_dim]));
    }
}

/// Consumes the `prefix` layers from the front of `entries`/`values`.
fn mlp_from_entries<'a>(
    prefix: &str,
    entries: &mut std::iter::Peekable<impl Iterator<Item = &'a LayoutEntry>>,
    values: &mut impl Iterator<Item = f64>,
) -> Result<Mlp> {
    let mut layers = Vec::new();
    loop {
        let Some(entry) = entries.peek() else { break };
        if !entry.name.starts_with(&format!("{prefix}.layer"))
            && !entry.name.starts_with(&format!("{prefix}.head"))
        {
            break;
        }
        let weight = entries.next().unwrap();
        let bias = entries
            .next()
            .ok_or_else(|| Error::Layout(format!("{} has no bias entry", weight.name)))?;
        let expected = layer_name(prefix, layers.len(), usize::MAX);
        let is_head = weight.name == format!("{prefix}.head.weight");
        if !(is_head || weight.name == format!("{expected}.weight")) {
            return Err(Error::Layout(format!("unexpected entry {}", weight.name)));
        }
        let (out_dim, in_dim) = match weight.shape.as_slice() {
            [o, i] => (*o, *i),
            _ => return Err(Error::Layout(format!("{} must be rank 2", weight.name))),
        };
        if bias.shape != [out_dim] || !bias.name.ends_with(".bias") {
            return Err(Error::Layout(format!("bad bias entry {}", bias.name)));
        }
        if let Some(prev) = layers.last() {
            let prev: &Linear = prev;
            if prev.out_dim != in_dim {
                return Err(Error::Layout(format!("{} input width mismatch", weight.name)));
            }
        }
        let mut layer = Linear::zeros(in_dim, out_dim);
        layer.weight.iter_mut().for_each(|w| *w = values.next().unwrap());
        layer.bias.iter_mut().for_each(|b| *b = values.next().unwrap());
        layers.push(layer);
        if is_head {
            break;
        }
    }
    if layers.is_empty() {
        return Err(Error::Layout(format!("no `{prefix}` layers found")));
    }
    Ok(Mlp { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Use the Gaussian mean.
    #[default]
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone)]
pub struct ActionSample {
    /// Unclipped draw; the log-probability refers to this.
    pub raw: Vec<f64>,
    /// What the environment receives.
    pub clipped: Vec<f64>,
    pub log_prob: f64,
}

/// State-independent diagonal Gaussian policy over a bounded box.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        rng: &mut R,
    ) -> Self {
        let sizes = sizes(obs_dim, hidden, action_low.len());
        Self {
            mean_net: Mlp::uniform(&sizes, rng),
            log_std: vec![0.0; action_low.len()],
            action_low,
            action_high,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mean = self.mean_net.forward(obs)?;
        Ok((mean, self.log_std.clone()))
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(&self.action_low)
            .zip(&self.action_high)
            .map(|((a, lo), hi)| a.clamp(*lo, *hi))
            .collect()
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<ActionSample> {
        let mean = self.mean_net.forward(obs)?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("policy mean".into()));
        }
        let raw: Vec<f64> = match mode {
            ActionMode::Deterministic => mean.clone(),
            ActionMode::Stochastic => mean
                .iter()
                .zip(&self.log_std)
                .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        let log_prob = gaussian::log_prob(&mean, &self.log_std, &raw)?;
        Ok(ActionSample {
            clipped: self.clip_action(&raw),
            raw,
            log_prob,
        })
    }

    pub fn clamp_log_std(&mut self) {
        for ls in &mut self.log_std {
            *ls = if ls.is_nan() {
                0.0
            } else {
                ls.clamp(LOG_STD_MIN, LOG_STD_MAX)
            };
        }
    }

    pub fn layout(&self) -> Vec<LayoutEntry> {
        let mut layout = Vec::new();
        mlp_layout(POLICY, &self.mean_net, &mut layout);
        layout.push(LayoutEntry::new(LOG_STD, vec![self.log_std.len()]));
        layout
    }

    pub fn param_count(&self) -> usize {
        self.mean_net.param_count() + self.log_std.len()
    }

    /// Policy subspace: trunk, head, then log-std.
    pub fn flatten(&self) -> FlatParams {
        let values = self
            .mean_net
            .params()
            .chain(self.log_std.iter().copied())
            .collect();
        FlatParams::new(values, self.layout()).expect("layout matches parameter count")
    }

    /// Overwrites the parameters in place; the layout must match exactly.
    pub fn load_flat(&mut self, flat: &FlatParams) -> Result<()> {
        if flat.layout() != self.layout().as_slice() {
            return Err(Error::Layout("policy layout differs from the target network".into()));
        }
        let mut values = flat.values().iter().copied();
        for p in self.mean_net.params_mut() {
            *p = values.next().unwrap();
        }
        for ls in &mut self.log_std {
            *ls = values.next().unwrap();
        }
        Ok(())
    }

    /// Rebuilds a policy from a flat vector whose layout starts with the
    /// policy entries (a full actor-critic vector is accepted too).
    pub fn from_flat(flat: &FlatParams, action_low: Vec<f64>, action_high: Vec<f64>) -> Result<Self> {
        let mut entries = flat.layout().iter().peekable();
        let mut values = flat.values().iter().copied();
        let mean_net = mlp_from_entries(POLICY, &mut entries, &mut values)?;
        let log_std_entry = entries
            .next()
            .ok_or_else(|| Error::Layout("missing policy.log_std".into()))?;
        if log_std_entry.name != LOG_STD || log_std_entry.shape != [mean_net.output_dim()] {
            return Err(Error::Layout(format!(
                "expected {LOG_STD} of shape [{}], found {} {:?}",
                mean_net.output_dim(),
                log_std_entry.name,
                log_std_entry.shape
            )));
        }
        if action_low.len() != mean_net.output_dim() || action_high.len() != mean_net.output_dim() {
            return Err(Error::Dimension {
                context: "action bounds",
                expected: mean_net.output_dim(),
                actual: action_low.len(),
            });
        }
        let log_std = (&mut values).take(mean_net.output_dim()).collect();
        Ok(Self {
            mean_net,
            log_std,
            action_low,
            action_high,
        })
    }
}

/// Scalar state-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub net: Mlp,
}

impl ValueNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        Self {
            net: Mlp::uniform(&sizes(obs_dim, hidden, 1), rng),
        }
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?[0])
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Separate policy and value networks, flattened policy-first.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: GaussianPolicy,
    pub value: ValueNet,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        rng: &mut R,
    ) -> Self {
        let policy = GaussianPolicy::new(obs_dim, hidden, action_low, action_high, rng);
        let value = ValueNet::new(obs_dim, hidden, rng);
        Self { policy, value }
    }

    /// A zero-valued copy, used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            policy: GaussianPolicy {
                mean_net: self.policy.mean_net.zeros_like(),
                log_std: vec![0.0; self.policy.log_std.len()],
                action_low: self.policy.action_low.clone(),
                action_high: self.policy.action_high.clone(),
            },
            value: ValueNet {
                net: self.value.net.zeros_like(),
            },
        }
    }

    pub fn layout(&self) -> Vec<LayoutEntry> {
        let mut layout = self.policy.layout();
        mlp_layout(VALUE, &self.value.net, &mut layout);
        layout
    }

    pub fn policy_len(&self) -> usize {
        self.policy.param_count()
    }

    pub fn flatten(&self) -> FlatParams {
        let values = self
            .policy
            .mean_net
            .params()
            .chain(self.policy.log_std.iter().copied())
            .chain(self.value.net.params())
            .collect();
        FlatParams::new(values, self.layout()).expect("layout matches parameter count")
    }

    pub fn load_flat(&mut self, flat: &FlatParams) -> Result<()> {
        if flat.layout() != self.layout().as_slice() {
            return Err(Error::Layout("actor-critic layout differs from the target networks".into()));
        }
        let mut values = flat.values().iter().copied();
        for p in self.policy.mean_net.params_mut() {
            *p = values.next().unwrap();
        }
        for ls in &mut self.policy.log_std {
            *ls = values.next().unwrap();
        }
        for p in self.value.net.params_mut() {
            *p = values.next().unwrap();
        }
        Ok(())
    }

    pub fn unflatten(flat: &FlatParams, action_low: Vec<f64>, action_high: Vec<f64>) -> Result<Self> {
        let policy = GaussianPolicy::from_flat(flat, action_low, action_high)?;
        let skip = policy.layout().len();
        let mut entries = flat.layout()[skip..].iter().peekable();
        let mut values = flat.values()[policy.param_count()..].iter().copied();
        let net = mlp_from_entries(VALUE, &mut entries, &mut values)?;
        if entries.next().is_some() {
            return Err(Error::Layout("unexpected entries after value head".into()));
        }
        if net.output_dim() != 1 || net.input_dim() != policy.obs_dim() {
            return Err(Error::Layout("value network shape does not fit the policy".into()));
        }
        Ok(Self {
            policy,
            value: ValueNet { net },
        })
    }

    /// Gradient-accumulator view as a flat vector in the parameter layout.
    pub fn as_gradient(&self) -> FlatParams {
        self.flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ac(seed: u64) -> ActorCritic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ac = ActorCritic::new(3, &DEFAULT_HIDDEN, vec![-2.0], vec![2.0], &mut rng);
        ac.policy.log_std = vec![-0.37];
        ac
    }

    #[test]
    fn policy_subspace_length_for_pendulum_shapes() {
        // 3·64+64 + 64·64+64 + 64·1+1 + 1
        let ac = random_ac(0);
        assert_eq!(ac.policy.flatten().len(), 4482);
        assert_eq!(ac.policy_len(), 4482);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ac = random_ac(11);
        let flat = ac.flatten();
        let back = ActorCritic::unflatten(&flat, vec![-2.0], vec![2.0]).unwrap();
        assert_eq!(back, ac);
        let again = back.flatten();
        assert!(flat
            .values()
            .iter()
            .zip(again.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn layout_order() {
        let names: Vec<_> = random_ac(1).layout().into_iter().map(|e| e.name).collect();
        assert_eq!(
            names,
            [
                "policy.layer0.weight",
                "policy.layer0.bias",
                "policy.layer1.weight",
                "policy.layer1.bias",
                "policy.head.weight",
                "policy.head.bias",
                "policy.log_std",
                "value.layer0.weight",
                "value.layer0.bias",
                "value.layer1.weight",
                "value.layer1.bias",
                "value.head.weight",
                "value.head.bias",
            ]
        );
    }

    #[test]
    fn zeros_unflatten_to_zero_nets() {
        let ac = random_ac(2);
        let zero = FlatParams::zeros(ac.layout());
        let nets = ActorCritic::unflatten(&zero, vec![-2.0], vec![2.0]).unwrap();
        assert_eq!(nets.policy.forward(&[0.4, 0.1, -3.0]).unwrap().0, vec![0.0]);
        assert_eq!(nets.value.value(&[0.4, 0.1, -3.0]).unwrap(), 0.0);
    }

    #[test]
    fn unflatten_rejects_wrong_layout() {
        let ac = random_ac(3);
        let mut layout = ac.layout();
        layout.swap(0, 1);
        let bad = FlatParams::zeros(layout);
        assert!(ActorCritic::unflatten(&bad, vec![-2.0], vec![2.0]).is_err());
        let mut other = random_ac(4);
        let small = Mlp::zeros(&[3, 8, 1]);
        other.value.net = small;
        assert!(ac.clone().load_flat(&other.flatten()).is_err());
    }

    #[test]
    fn policy_from_full_vector() {
        let ac = random_ac(5);
        let p = GaussianPolicy::from_flat(&ac.flatten(), vec![-2.0], vec![2.0]).unwrap();
        assert_eq!(p, ac.policy);
    }

    #[test]
    fn stochastic_actions_are_clipped_but_scored_unclipped() {
        let mut ac = random_ac(6);
        ac.policy.log_std = vec![2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = ac.policy.act(&[1.0, 0.0, 0.0], ActionMode::Stochastic, &mut rng).unwrap();
            assert!(s.clipped[0].abs() <= 2.0);
            let (mean, ls) = ac.policy.forward(&[1.0, 0.0, 0.0]).unwrap();
            assert_eq!(s.log_prob, gaussian::log_prob(&mean, &ls, &s.raw).unwrap());
        }
    }

    #[test]
    fn clamp_log_std_bounds() {
        let mut ac = random_ac(7);
        ac.policy.log_std = vec![5.0];
        ac.policy.clamp_log_std();
        assert_eq!(ac.policy.log_std, vec![2.0]);
        ac.policy.log_std = vec![-50.0];
        ac.policy.clamp_log_std();
        assert_eq!(ac.policy.log_std, vec![-20.0]);
    }
}
