//! Reward-generating environments.
//!
//! An [`Instance`] pairs a reward model over (treatment, subpopulation) cells
//! with the true population distribution. Bernoulli instances are built
//! explicitly or through the worst-case generators; replay instances resample
//! historical records uniformly with replacement.
//!
//! Treatments and subpopulations are 0-based inside the crate and 1-based in
//! all external files and reports.

use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::PopulationDistribution;
use crate::error::{Error, Result};

/// One historical observation for the replay environment (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayRecord {
    pub treatment: usize,
    pub subpopulation: usize,
    pub reward: f64,
}

/// Per-cell pools of historical rewards, indexed `treatment * k + subpopulation`.
#[derive(Debug, Clone)]
pub struct ReplayPools {
    cells: Vec<Vec<f64>>,
    k: usize,
}

impl ReplayPools {
    pub fn cell(&self, treatment: usize, subpopulation: usize) -> &[f64] {
        &self.cells[treatment * self.k + subpopulation]
    }
}

#[derive(Debug, Clone)]
pub enum RewardModel {
    /// Rewards are Bernoulli with the instance means.
    Bernoulli,
    /// Rewards are drawn uniformly with replacement from per-cell pools.
    Replay(ReplayPools),
}

/// A fully specified problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    n: usize,
    k: usize,
    /// Means in row-major layout: `means[i][j]` for treatment `i`, subpopulation `j`.
    means: Vec<Vec<f64>>,
    model: RewardModel,
    population: PopulationDistribution,
}

impl Instance {
    /// Bernoulli instance from an explicit mean matrix (`n` rows of length `k`).
    pub fn bernoulli(means: Vec<Vec<f64>>, population: PopulationDistribution) -> Result<Self> {
        let n = means.len();
        if n == 0 {
            return Err(Error::InvalidInstance("at least one treatment required".into()));
        }
        let k = population.len();
        for (i, row) in means.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    context: "instance means row",
                    expected: k,
                    actual: row.len(),
                });
            }
            for (j, &mu) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&mu) {
                    return Err(Error::InvalidInstance(format!(
                        "mean {mu} at treatment {}, subpopulation {} outside [0, 1]",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            n,
            k,
            means,
            model: RewardModel::Bernoulli,
            population,
        })
    }

    /// Builds a replay instance from historical records.
    ///
    /// `n` and `k` are inferred from the largest observed indices; every
    /// subpopulation needs at least one record (the population weights must be
    /// strictly positive) and every (treatment, subpopulation) cell must be
    /// covered. Population weights become the empirical subpopulation
    /// frequencies and means the per-cell averages.
    pub fn replay(records: &[ReplayRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInstance("no replay records".into()));
        }
        let n = records.iter().map(|r| r.treatment).max().unwrap() + 1;
        let k = records.iter().map(|r| r.subpopulation).max().unwrap() + 1;

        for (idx, r) in records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.reward) {
                return Err(Error::InvalidInstance(format!(
                    "record {} reward {} outside [0, 1]; declare reward_min/reward_max to rescale",
                    idx + 1,
                    r.reward
                )));
            }
        }

        let mut subpop_counts = vec![0u64; k];
        let mut cells: Vec<Vec<f64>> = vec![Vec::new(); n * k];
        for r in records {
            subpop_counts[r.subpopulation] += 1;
            cells[r.treatment * k + r.subpopulation].push(r.reward);
        }

        if let Some(j) = subpop_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInstance(format!(
                "subpopulation {} has no records; population weights must be strictly positive",
                j + 1
            )));
        }
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| cells[i * k + j].is_empty())
            .map(|(i, j)| (i + 1, j + 1))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingReplayCells(missing));
        }

        let total = records.len() as f64;
        let population = PopulationDistribution::normalized(
            subpop_counts.iter().map(|&c| c as f64 / total).collect(),
        )?;
        let means: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let pool = &cells[i * k + j];
                        pool.iter().sum::<f64>() / pool.len() as f64
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            k,
            means,
            model: RewardModel::Replay(ReplayPools { cells, k }),
            population,
        })
    }

    pub fn treatments(&self) -> usize {
        self.n
    }

    pub fn subpopulations(&self) -> usize {
        self.k
    }

    pub fn mean(&self, treatment: usize, subpopulation: usize) -> f64 {
        self.means[treatment][subpopulation]
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn population(&self) -> &PopulationDistribution {
        &self.population
    }

    pub fn model(&self) -> &RewardModel {
        &self.model
    }

    /// Highest mean in a subpopulation; any maximizer counts as optimal.
    pub fn best_mean(&self, subpopulation: usize) -> f64 {
        (0..self.n)
            .map(|i| self.means[i][subpopulation])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Draws a subpopulation from the true population distribution.
    pub fn sample_context<R: Rng>(&self, rng: &mut R) -> usize {
        crate::rng::sample_categorical(rng, self.population.weights())
    }

    /// Draws one reward for the given cell: Bernoulli with the cell mean, or
    /// a uniformly resampled historical record. Cell validity is guaranteed
    /// at construction, never checked at sample time.
    pub fn sample_reward<R: Rng>(
        &self,
        treatment: usize,
        subpopulation: usize,
        rng: &mut R,
    ) -> f64 {
        match &self.model {
            RewardModel::Bernoulli => {
                let u: f64 = rng.random();
                if u < self.means[treatment][subpopulation] {
                    1.0
                } else {
                    0.0
                }
            }
            RewardModel::Replay(pools) => {
                let pool = pools.cell(treatment, subpopulation);
                pool[rng.random_range(0..pool.len())]
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let wire = InstanceJson {
            n: self.n,
            k: self.k,
            p: self.population.weights().to_vec(),
            means: self.means.clone(),
            model: match self.model {
                RewardModel::Bernoulli => "bernoulli".into(),
                RewardModel::Replay(_) => "replay".into(),
            },
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    /// Reads a Bernoulli instance back from its JSON form. Replay instances
    /// carry record pools that are not part of the JSON schema; reload those
    /// from their CSV source instead.
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: InstanceJson = serde_json::from_str(text)?;
        if wire.model != "bernoulli" {
            return Err(Error::InvalidInstance(format!(
                "model '{}' cannot be imported from JSON; replay instances load from CSV records",
                wire.model
            )));
        }
        if wire.p.len() != wire.k || wire.means.len() != wire.n {
            return Err(Error::InvalidInstance(
                "JSON dimensions disagree with n/k fields".into(),
            ));
        }
        let population = PopulationDistribution::new(wire.p)?;
        Self::bernoulli(wire.means, population)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    k: usize,
    p: Vec<f64>,
    means: Vec<Vec<f64>>,
    model: String,
}

/// Member of the binary-hypercube hard family used by the lower-bound
/// construction and the rate-scaling experiments.
///
/// Means are `1/2 + delta_j` for treatment 1 (index 0), `1/2 + 2 delta_j`
/// for the alternative `alt_arms[j]` when `omega[j]` is set, and `1/2`
/// elsewhere; the optimal arm is treatment 1 when `omega[j]` is unset and the
/// alternative otherwise. Gaps must lie in `(0, 1/4]` and alternatives must
/// differ from treatment 1.
pub fn make_hard_family_member(
    n: usize,
    k: usize,
    population: PopulationDistribution,
    deltas: &[f64],
    alt_arms: &[usize],
    omega: &[bool],
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInstance(
            "hard family needs at least two treatments".into(),
        ));
    }
    if population.len() != k {
        return Err(Error::DimensionMismatch {
            context: "hard family population",
            expected: k,
            actual: population.len(),
        });
    }
    for (name, len) in [("deltas", deltas.len()), ("alt_arms", alt_arms.len()), ("omega", omega.len())] {
        if len != k {
            return Err(Error::InvalidInstance(format!(
                "{name} must have length k = {k}, got {len}"
            )));
        }
    }
    for (j, &d) in deltas.iter().enumerate() {
        if !(d > 0.0 && d <= 0.25) {
            return Err(Error::GapOutOfRange { index: j, value: d });
        }
    }
    for (j, &b) in alt_arms.iter().enumerate() {
        if b == 0 || b >= n {
            return Err(Error::InvalidInstance(format!(
                "alternative arm {} for subpopulation {} must lie in 2..={n} (1-based)",
                b + 1,
                j + 1
            )));
        }
    }
    let mut means = vec![vec![0.5; k]; n];
    for j in 0..k {
        means[0][j] = 0.5 + deltas[j];
        if omega[j] {
            means[alt_arms[j]][j] = 0.5 + 2.0 * deltas[j];
        }
    }
    Instance::bernoulli(means, population)
}

/// Worst-case synthetic instance: in each subpopulation one uniformly random
/// treatment gets mean `1/2 + delta_j` with `delta_j = sqrt(n/T) p_j^(-1/3)`,
/// all others `1/2`. Gaps are clipped at `1/2` so means stay in `[0, 1]`.
pub fn make_synthetic_worstcase<R: Rng>(
    n: usize,
    k: usize,
    population: PopulationDistribution,
    horizon: u64,
    rng: &mut R,
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInstance(
            "synthetic generator needs at least two treatments".into(),
        ));
    }
    if horizon < 1 {
        return Err(Error::InvalidInstance("horizon must be at least 1".into()));
    }
    if population.len() != k {
        return Err(Error::DimensionMismatch {
            context: "synthetic population",
            expected: k,
            actual: population.len(),
        });
    }
    let scale = (n as f64 / horizon as f64).sqrt();
    let mut means = vec![vec![0.5; k]; n];
    for (j, &pj) in population.weights().iter().enumerate() {
        let delta = (scale * pj.powf(-1.0 / 3.0)).min(0.5);
        let best = rng.random_range(0..n);
        means[best][j] = 0.5 + delta;
    }
    Instance::bernoulli(means, population)
}

/// Skewed population `(1 - eps, eps/(k-1), ..., eps/(k-1))` with
/// `eps = 1/sqrt(k-1)`.
///
/// At `k = 2` the formula gives `eps = 1` and a zero first coordinate, which
/// is not a valid strictly positive distribution, so the generator requires
/// `k >= 3`.
pub fn make_skewed_p(k: usize) -> Result<PopulationDistribution> {
    if k < 2 {
        return Err(Error::InvalidDistribution(format!(
            "skewed population requires k >= 2, got {k}"
        )));
    }
    if k == 2 {
        return Err(Error::InvalidDistribution(
            "skewed population degenerates at k = 2 (eps = 1 zeroes the first weight); use k >= 3"
                .into(),
        ));
    }
    let eps = 1.0 / ((k - 1) as f64).sqrt();
    let mut w = Vec::with_capacity(k);
    w.push(1.0 - eps);
    w.extend(std::iter::repeat_n(eps / (k - 1) as f64, k - 1));
    PopulationDistribution::normalized(w)
}

/// Parses replay records from CSV.
///
/// Format: header `treatment,subpopulation,reward`, one record per line,
/// 1-based indices, UTF-8. Lines starting with `#` are comments; the
/// directives `# reward_min=<v>` and `# reward_max=<v>` declare the raw
/// rating range, and rewards are rescaled by `(r - min) / (max - min)`.
/// Explicit `min`/`max` arguments (e.g. from CLI flags) override directives.
pub fn parse_replay_csv<R: BufRead>(
    reader: R,
    reward_min: Option<f64>,
    reward_max: Option<f64>,
) -> Result<Vec<ReplayRecord>> {
    let mut raw: Vec<(usize, ReplayRecord)> = Vec::new();
    let mut file_min = None;
    let mut file_max = None;
    let mut header_seen = false;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            for (key, slot) in [("reward_min", &mut file_min), ("reward_max", &mut file_max)] {
                if let Some(value) = comment.strip_prefix(key).and_then(|s| s.trim().strip_prefix('=')) {
                    *slot = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno,
                        message: format!("bad {key} directive: {e}"),
                    })?);
                }
            }
            continue;
        }
        if !header_seen {
            let expected = "treatment,subpopulation,reward";
            if trimmed.replace(' ', "") != expected {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected header '{expected}', got '{trimmed}'"),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let treatment: usize = fields[0].parse().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("bad treatment index: {e}"),
        })?;
        let subpopulation: usize = fields[1].parse().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("bad subpopulation index: {e}"),
        })?;
        let reward: f64 = fields[2].parse().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("bad reward: {e}"),
        })?;
        if treatment == 0 || subpopulation == 0 {
            return Err(Error::Parse {
                line: lineno,
                message: "treatment and subpopulation indices are 1-based".into(),
            });
        }
        raw.push((
            lineno,
            ReplayRecord {
                treatment: treatment - 1,
                subpopulation: subpopulation - 1,
                reward,
            },
        ));
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 0,
            message: "missing header 'treatment,subpopulation,reward'".into(),
        });
    }

    let min = reward_min.or(file_min);
    let max = reward_max.or(file_max);
    match (min, max) {
        (Some(lo), Some(hi)) => {
            if hi <= lo || hi.is_nan() || lo.is_nan() {
                return Err(Error::Config(format!(
                    "reward_max {hi} must exceed reward_min {lo}"
                )));
            }
            for (lineno, r) in &mut raw {
                if r.reward < lo || r.reward > hi {
                    return Err(Error::Parse {
                        line: *lineno,
                        message: format!(
                            "reward {} outside declared range [{lo}, {hi}]",
                            r.reward
                        ),
                    });
                }
                r.reward = (r.reward - lo) / (hi - lo);
            }
        }
        (None, None) => {}
        _ => {
            return Err(Error::Config(
                "reward_min and reward_max must be declared together".into(),
            ));
        }
    }
    Ok(raw.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn uniform(k: usize) -> PopulationDistribution {
        PopulationDistribution::uniform(k).unwrap()
    }

    #[test]
    fn context_sampling_frequencies() {
        let p = PopulationDistribution::new(vec![0.8, 0.2]).unwrap();
        let inst = Instance::bernoulli(vec![vec![0.5, 0.5]], p).unwrap();
        let mut r = rng::context_stream(17);
        let draws = 100_000;
        let ones = (0..draws).filter(|_| inst.sample_context(&mut r) == 0).count();
        let freq = ones as f64 / draws as f64;
        let sigma = (0.8 * 0.2 / draws as f64).sqrt();
        assert!((freq - 0.8).abs() < 3.0 * sigma, "freq {freq}");

        let single = Instance::bernoulli(
            vec![vec![0.5]],
            PopulationDistribution::new(vec![1.0]).unwrap(),
        )
        .unwrap();
        for _ in 0..100 {
            assert_eq!(single.sample_context(&mut r), 0);
        }
    }

    #[test]
    fn context_sampling_reproducible() {
        let p = PopulationDistribution::new(vec![0.8, 0.2]).unwrap();
        let inst = Instance::bernoulli(vec![vec![0.5, 0.5]], p).unwrap();
        let seq = |seed| {
            let mut r = rng::context_stream(seed);
            (0..64).map(|_| inst.sample_context(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
        assert_ne!(seq(5), seq(6));
    }

    #[test]
    fn bernoulli_rewards_match_means() {
        let inst = Instance::bernoulli(vec![vec![1.0], vec![0.5]], uniform(1)).unwrap();
        let mut r = rng::reward_stream(3, 0, 0);
        for _ in 0..50 {
            assert_eq!(inst.sample_reward(0, 0, &mut r), 1.0);
        }
        let draws = 100_000;
        let mut sum = 0.0;
        let mut r = rng::reward_stream(3, 1, 0);
        for _ in 0..draws {
            sum += inst.sample_reward(1, 0, &mut r);
        }
        assert!((sum / draws as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn replay_rewards_resample_pool() {
        let records = vec![
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 0.25 },
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 0.75 },
        ];
        let inst = Instance::replay(&records).unwrap();
        assert_eq!(inst.mean(0, 0), 0.5);
        let mut r = rng::reward_stream(9, 0, 0);
        let draws = 100_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let x = inst.sample_reward(0, 0, &mut r);
            assert!(x == 0.25 || x == 0.75);
            sum += x;
        }
        assert!((sum / draws as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn replay_validation_errors() {
        // Cell (2, 2) missing.
        let records = vec![
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 0.0 },
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 1.0 },
            ReplayRecord { treatment: 1, subpopulation: 0, reward: 0.5 },
            ReplayRecord { treatment: 0, subpopulation: 1, reward: 0.25 },
        ];
        match Instance::replay(&records) {
            Err(Error::MissingReplayCells(cells)) => assert_eq!(cells, vec![(2, 2)]),
            other => panic!("expected missing-cell error, got {other:?}"),
        }
        // Subpopulation 1 empty (indices only reach subpopulation 2).
        let records = vec![
            ReplayRecord { treatment: 0, subpopulation: 1, reward: 0.5 },
        ];
        assert!(matches!(
            Instance::replay(&records),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn replay_small_reference_instances() {
        // n = 1, k = 2 with rewards (0, 1) in subpopulation 1 and (1) in 2.
        let records = vec![
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 0.0 },
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 1.0 },
            ReplayRecord { treatment: 0, subpopulation: 1, reward: 1.0 },
        ];
        let inst = Instance::replay(&records).unwrap();
        assert_eq!(inst.population().weights(), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(inst.means(), &[vec![0.5, 1.0]]);

        let single = Instance::replay(&[ReplayRecord {
            treatment: 0,
            subpopulation: 0,
            reward: 0.7,
        }])
        .unwrap();
        assert_eq!(single.population().weights(), &[1.0]);
        assert_eq!(single.mean(0, 0), 0.7);
    }

    #[test]
    fn replay_round_trip_reproduces_fields() {
        let records = vec![
            ReplayRecord { treatment: 0, subpopulation: 0, reward: 0.2 },
            ReplayRecord { treatment: 0, subpopulation: 1, reward: 0.4 },
            ReplayRecord { treatment: 1, subpopulation: 0, reward: 0.9 },
            ReplayRecord { treatment: 1, subpopulation: 1, reward: 0.1 },
            ReplayRecord { treatment: 1, subpopulation: 1, reward: 0.5 },
        ];
        let inst = Instance::replay(&records).unwrap();
        let RewardModel::Replay(pools) = inst.model() else {
            panic!("expected replay model");
        };
        for i in 0..inst.treatments() {
            for j in 0..inst.subpopulations() {
                let pool = pools.cell(i, j);
                let mean = pool.iter().sum::<f64>() / pool.len() as f64;
                assert_eq!(mean, inst.mean(i, j));
            }
        }
        let total: usize = (0..inst.treatments())
            .flat_map(|i| (0..inst.subpopulations()).map(move |j| (i, j)))
            .map(|(i, j)| pools.cell(i, j).len())
            .sum();
        let counts: Vec<f64> = (0..inst.subpopulations())
            .map(|j| {
                (0..inst.treatments()).map(|i| pools.cell(i, j).len()).sum::<usize>() as f64
                    / total as f64
            })
            .collect();
        for (a, b) in counts.iter().zip(inst.population().weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hard_family_reference_means() {
        let p = uniform(1);
        // n = 2, k = 1, delta 0.1, alternative arm 2, omega = 1 -> (0.6, 0.7).
        let inst =
            make_hard_family_member(2, 1, p.clone(), &[0.1], &[1], &[true]).unwrap();
        assert_eq!(inst.mean(0, 0), 0.6);
        assert_eq!(inst.mean(1, 0), 0.7);
        assert_eq!(inst.best_mean(0), 0.7);

        // omega = 0 leaves treatment 1 optimal with gap delta.
        let inst = make_hard_family_member(2, 1, p, &[0.1], &[1], &[false]).unwrap();
        assert_eq!(inst.mean(0, 0), 0.6);
        assert_eq!(inst.mean(1, 0), 0.5);
        assert_eq!(inst.best_mean(0), 0.6);
    }

    #[test]
    fn hard_family_unique_optimum() {
        let p = uniform(4);
        let inst = make_hard_family_member(
            3,
            4,
            p,
            &[0.05, 0.1, 0.2, 0.25],
            &[1, 2, 1, 2],
            &[true, false, true, false],
        )
        .unwrap();
        for j in 0..4 {
            let best = inst.best_mean(j);
            let count = (0..3).filter(|&i| inst.mean(i, j) == best).count();
            assert_eq!(count, 1, "subpopulation {j} should have a unique optimum");
        }
    }

    #[test]
    fn hard_family_rejects_bad_gaps_and_arms() {
        let p = uniform(1);
        assert!(matches!(
            make_hard_family_member(2, 1, p.clone(), &[0.3], &[1], &[false]),
            Err(Error::GapOutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            make_hard_family_member(2, 1, p.clone(), &[0.0], &[1], &[false]),
            Err(Error::GapOutOfRange { .. })
        ));
        assert!(make_hard_family_member(2, 1, p, &[0.1], &[0], &[false]).is_err());
    }

    #[test]
    fn synthetic_gap_values() {
        let p = uniform(20);
        let mut r = rng::generator_stream(4);
        let inst = make_synthetic_worstcase(5, 20, p.clone(), 10_000, &mut r).unwrap();
        // delta = sqrt(5/10^4) * 20^(1/3), 50-digit reference value.
        let delta = 0.060_696_223_100_291_72;
        for j in 0..20 {
            let measured = inst.best_mean(j) - 0.5;
            assert!((measured - delta).abs() < 1e-12);
            let others = (0..5).filter(|&i| inst.mean(i, j) == 0.5).count();
            assert_eq!(others, 4);
        }
    }

    #[test]
    fn synthetic_clips_large_gaps() {
        // Tiny weight drives delta past 1/2; it must clip so means stay <= 1.
        let p = PopulationDistribution::normalized(vec![1e-6, 1.0]).unwrap();
        let mut r = rng::generator_stream(8);
        let inst = make_synthetic_worstcase(2, 2, p, 10, &mut r).unwrap();
        assert_eq!(inst.best_mean(0), 1.0);
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let p = uniform(6);
        let gen = |seed| {
            let mut r = rng::generator_stream(seed);
            make_synthetic_worstcase(3, 6, p.clone(), 1000, &mut r)
                .unwrap()
                .means()
                .to_vec()
        };
        assert_eq!(gen(12), gen(12));
        assert_ne!(gen(12), gen(13));
    }

    #[test]
    fn skewed_population_values() {
        let p = make_skewed_p(5).unwrap();
        assert_eq!(p.weights()[0], 0.5);
        for &w in &p.weights()[1..] {
            assert!((w - 0.125).abs() < 1e-15);
        }
        let p = make_skewed_p(17).unwrap();
        assert!((p.weights()[0] - 0.75).abs() < 1e-15);
        for &w in &p.weights()[1..] {
            assert!((w - 0.015625).abs() < 1e-15);
        }
        assert!(make_skewed_p(2).is_err());
        assert!(make_skewed_p(1).is_err());
    }

    #[test]
    fn csv_parsing_with_directives() {
        let text = "\
# MovieLens-style ratings
# reward_min=1
# reward_max=5
treatment,subpopulation,reward
1,1,1
1,1,5
1,2,3
";
        let records = parse_replay_csv(text.as_bytes(), None, None).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].reward, 0.0);
        assert_eq!(records[1].reward, 1.0);
        assert_eq!(records[2].reward, 0.5);
        assert_eq!(records[2].subpopulation, 1);
    }

    #[test]
    fn csv_parsing_errors() {
        let no_header = "1,1,0.5\n";
        assert!(parse_replay_csv(no_header.as_bytes(), None, None).is_err());

        let zero_index = "treatment,subpopulation,reward\n0,1,0.5\n";
        assert!(parse_replay_csv(zero_index.as_bytes(), None, None).is_err());

        let out_of_range = "treatment,subpopulation,reward\n1,1,7\n";
        let records = parse_replay_csv(out_of_range.as_bytes(), None, None).unwrap();
        // Out-of-range rewards surface at instance construction when no
        // rescale range was declared.
        assert!(Instance::replay(&records).is_err());
        assert!(parse_replay_csv(out_of_range.as_bytes(), Some(1.0), Some(5.0)).is_err());

        let half_range = "treatment,subpopulation,reward\n1,1,3\n";
        assert!(parse_replay_csv(half_range.as_bytes(), Some(1.0), None).is_err());
    }

    #[test]
    fn json_round_trip_bernoulli_only() {
        let p = PopulationDistribution::new(vec![0.8, 0.2]).unwrap();
        let inst = Instance::bernoulli(vec![vec![0.9, 0.1], vec![0.4, 0.6]], p).unwrap();
        let text = inst.to_json().unwrap();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back.means(), inst.means());
        assert_eq!(back.population().weights(), inst.population().weights());

        let replay = Instance::replay(&[ReplayRecord {
            treatment: 0,
            subpopulation: 0,
            reward: 0.7,
        }])
        .unwrap();
        let text = replay.to_json().unwrap();
        assert!(text.contains("\"replay\""));
        assert!(Instance::from_json(&text).is_err());
    }

    #[test]
    fn fuzzed_rewards_stay_in_range() {
        let mut r = rng::generator_stream(77);
        for trial in 0..100 {
            let n = 1 + (trial % 4);
            let k = 1 + (trial % 3);
            let p = uniform(k);
            let means: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| r.random::<f64>()).collect())
                .collect();
            let inst = Instance::bernoulli(means, p).unwrap();
            let mut reward_rng = rng::reward_stream(trial as u64, 0, 0);
            for _ in 0..10_000 {
                let i = r.random_range(0..n);
                let j = r.random_range(0..k);
                let x = inst.sample_reward(i, j, &mut reward_rng);
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
