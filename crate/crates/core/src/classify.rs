//! The diffusion classifier: paired Monte Carlo scoring of per-class noise
//! reconstruction losses, Bayes posterior, adaptive candidate pruning, and
//! the multi-view majority vote.
//!
//! Scoring draws one set of `(t, eps)` trial pairs and reuses it for every
//! candidate class (common random numbers), so the shared noise term
//! cancels out of score differences and the argmin stabilizes with far
//! fewer trials than independent per-class draws would need.

use serde::Serialize;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::schedule::{eps_loss, ConditionalDenoiser, NoiseSchedule};
use crate::views::DepthImage;

/// One Monte Carlo trial: a timestep and a noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPair {
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Draw `n_trials` trial pairs: `t` uniform over the schedule, `eps`
/// standard normal of the given dimension. Draw order per trial is `t`
/// then the noise coordinates.
pub fn draw_trial_pairs(
    seed: u64,
    n_trials: usize,
    sched: &NoiseSchedule,
    dim: usize,
) -> Vec<TrialPair> {
    let mut rng = rng_from(seed);
    (0..n_trials)
        .map(|_| {
            let t = rng.random_range(1..=sched.len());
            let eps = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            TrialPair { t, eps }
        })
        .collect()
}

/// Mean noise-reconstruction loss of one candidate over the given pairs.
pub fn score_with_pairs(
    model: &dyn ConditionalDenoiser,
    z0: &[f64],
    class: usize,
    pairs: &[TrialPair],
    sched: &NoiseSchedule,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("trial pair list"));
    }
    let mut sum = 0.0;
    for p in pairs {
        sum += eps_loss(model, z0, class, p.t, &p.eps, sched)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Outcome of scoring one object against a candidate set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    /// Candidate class ids, in the order given by the caller.
    pub candidates: Vec<usize>,
    /// Mean noise-reconstruction loss per candidate.
    pub mean_losses: Vec<f64>,
    /// Normalized class probabilities under a uniform prior.
    pub posterior: Vec<f64>,
    /// Argmin of mean loss among surviving candidates (lowest id on ties).
    pub predicted: usize,
    /// Trials actually spent per candidate.
    pub trials_used: Vec<usize>,
}

/// Argmin by (score, class id): strictly smaller loss wins, equal losses
/// go to the lower class id.
fn argmin_class(candidates: &[usize], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scores[i] < scores[best]
            || (scores[i] == scores[best] && candidates[i] < candidates[best]);
        if better {
            best = i;
        }
    }
    candidates[best]
}

fn check_candidates(candidates: &[usize]) -> Result<()> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 candidate classes, got {}",
            candidates.len()
        )));
    }
    Ok(())
}

/// Score `z0` against each candidate with paired trials and pick the
/// argmin. Deterministic for a fixed seed.
pub fn classify_latent(
    model: &dyn ConditionalDenoiser,
    z0: &[f64],
    candidates: &[usize],
    n_trials: usize,
    seed: u64,
    sched: &NoiseSchedule,
) -> Result<ClassificationResult> {
    check_candidates(candidates)?;
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    let pairs = draw_trial_pairs(seed, n_trials, sched, z0.len());
    let mut mean_losses = Vec::with_capacity(candidates.len());
    for &c in candidates {
        mean_losses.push(score_with_pairs(model, z0, c, &pairs, sched)?);
    }
    let prior = vec![1.0 / candidates.len() as f64; candidates.len()];
    let post = posterior(&mean_losses, &prior)?;
    Ok(ClassificationResult {
        candidates: candidates.to_vec(),
        predicted: argmin_class(candidates, &mean_losses),
        posterior: post,
        trials_used: vec![n_trials; candidates.len()],
        mean_losses,
    })
}

/// Bayes posterior from mean losses: `p(c_i | x)` proportional to
/// `prior_i * exp(-L_i)`, computed stably by subtracting the minimum loss
/// before exponentiation.
pub fn posterior(mean_losses: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
    if mean_losses.is_empty() {
        return Err(Error::Empty("loss list"));
    }
    if mean_losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("non-finite loss".into()));
    }
    if prior.len() != mean_losses.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} losses vs {} prior entries",
            mean_losses.len(),
            prior.len()
        )));
    }
    if prior.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument(
            "prior entries must be > 0".into(),
        ));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "prior sums to {total}, expected 1"
        )));
    }
    let min = mean_losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let unnorm: Vec<f64> = mean_losses
        .iter()
        .zip(prior)
        .map(|(l, p)| p * (-(l - min)).exp())
        .collect();
    let z: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / z).collect())
}

/// One stage of the adaptive schedule: spend `trials` more paired trials
/// on the surviving candidates, then keep the `keep` lowest running means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSpec {
    pub trials: usize,
    pub keep: usize,
}

/// Stage-wise classification with candidate pruning.
///
/// Trial pairs are drawn up front for the whole schedule from the same
/// stream as [`classify_latent`], so a single stage `(n, keep 1)` scores
/// identically to `classify_latent` with `n` trials. Losses accumulate
/// across stages; pruned candidates keep their partial running means.
pub fn classify_adaptive(
    model: &dyn ConditionalDenoiser,
    z0: &[f64],
    candidates: &[usize],
    stages: &[StageSpec],
    seed: u64,
    sched: &NoiseSchedule,
) -> Result<ClassificationResult> {
    check_candidates(candidates)?;
    if stages.is_empty() {
        return Err(Error::InvalidArgument("empty stage schedule".into()));
    }
    for s in stages {
        if s.trials == 0 || s.keep == 0 {
            return Err(Error::InvalidArgument(
                "each stage needs trials >= 1 and keep >= 1".into(),
            ));
        }
    }
    for w in stages.windows(2) {
        if w[1].keep >= w[0].keep {
            return Err(Error::InvalidArgument(
                "keep counts must be strictly decreasing".into(),
            ));
        }
    }
    if stages[0].keep > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "first keep {} exceeds candidate count {}",
            stages[0].keep,
            candidates.len()
        )));
    }
    let total_trials: usize = stages.iter().map(|s| s.trials).sum();
    let pairs = draw_trial_pairs(seed, total_trials, sched, z0.len());

    let mut loss_sum = vec![0.0; candidates.len()];
    let mut trials_used = vec![0usize; candidates.len()];
    let mut survivors: Vec<usize> = (0..candidates.len()).collect();
    let mut offset = 0;
    for stage in stages {
        let window = &pairs[offset..offset + stage.trials];
        offset += stage.trials;
        for &i in &survivors {
            for p in window {
                loss_sum[i] += eps_loss(model, z0, candidates[i], p.t, &p.eps, sched)?;
            }
            trials_used[i] += stage.trials;
        }
        if stage.keep < survivors.len() {
            survivors.sort_by(|&a, &b| {
                let ma = loss_sum[a] / trials_used[a] as f64;
                let mb = loss_sum[b] / trials_used[b] as f64;
                ma.partial_cmp(&mb)
                    .unwrap()
                    .then(candidates[a].cmp(&candidates[b]))
            });
            survivors.truncate(stage.keep);
        }
    }
    let mean_losses: Vec<f64> = loss_sum
        .iter()
        .zip(&trials_used)
        .map(|(s, &n)| s / n as f64)
        .collect();
    let surviving_ids: Vec<usize> = survivors.iter().map(|&i| candidates[i]).collect();
    let surviving_means: Vec<f64> = survivors.iter().map(|&i| mean_losses[i]).collect();
    let prior = vec![1.0 / candidates.len() as f64; candidates.len()];
    let post = posterior(&mean_losses, &prior)?;
    Ok(ClassificationResult {
        candidates: candidates.to_vec(),
        predicted: argmin_class(&surviving_ids, &surviving_means),
        posterior: post,
        trials_used,
        mean_losses,
    })
}

/// Mode of the votes.
///
/// With `n_classes == 2` this is the one-vs-rest threshold rule: class 1
/// wins exactly when it takes at least half the votes (so an even split
/// goes to the positive class). With more classes, ties break toward the
/// lowest class id.
pub fn majority_vote(votes: &[usize], n_classes: usize) -> Result<usize> {
    if votes.is_empty() {
        return Err(Error::Empty("vote list"));
    }
    if n_classes == 0 {
        return Err(Error::InvalidArgument("n_classes must be >= 1".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &v in votes {
        if v >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "vote {v} outside 0..{n_classes}"
            )));
        }
        counts[v] += 1;
    }
    if n_classes == 2 {
        return Ok(usize::from(2 * counts[1] >= votes.len()));
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Per-view predictions and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteRecord {
    pub per_view: Vec<usize>,
    pub final_vote: usize,
}

/// Classify each depth view independently and aggregate by majority vote.
///
/// Views are flattened row-major into latent vectors; each view gets its
/// own derived trial seed, while candidates within a view share pairs as
/// usual.
pub fn classify_multiview(
    model: &dyn ConditionalDenoiser,
    views: &[DepthImage],
    candidates: &[usize],
    n_trials: usize,
    seed: u64,
    sched: &NoiseSchedule,
) -> Result<VoteRecord> {
    Ok(classify_multiview_detailed(model, views, candidates, n_trials, seed, sched)?.0)
}

/// As [`classify_multiview`], additionally returning each view's full
/// scoring result.
pub fn classify_multiview_detailed(
    model: &dyn ConditionalDenoiser,
    views: &[DepthImage],
    candidates: &[usize],
    n_trials: usize,
    seed: u64,
    sched: &NoiseSchedule,
) -> Result<(VoteRecord, Vec<ClassificationResult>)> {
    if views.is_empty() {
        return Err(Error::Empty("view list"));
    }
    let size = views[0].size;
    for v in views {
        if v.size != size {
            return Err(Error::DimensionMismatch(format!(
                "view sizes differ: {size} vs {}",
                v.size
            )));
        }
    }
    if size * size != model.latent_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{size}x{size} views in a {}-dim image model",
            model.latent_dim()
        )));
    }
    let mut per_view = Vec::with_capacity(views.len());
    let mut results = Vec::with_capacity(views.len());
    for (i, view) in views.iter().enumerate() {
        let result = classify_latent(
            model,
            &view.to_latent(),
            candidates,
            n_trials,
            derive_seed(seed, &format!("view/{i}")),
            sched,
        )?;
        per_view.push(result.predicted);
        results.push(result);
    }
    let final_vote = majority_vote(&per_view, model.num_classes())?;
    Ok((
        VoteRecord {
            per_view,
            final_vote,
        },
        results,
    ))
}

/// Per-object record emitted by the harness.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectRecord {
    pub object_id: String,
    pub candidates: Vec<usize>,
    pub mean_losses: Vec<f64>,
    pub posterior: Vec<f64>,
    pub predicted: usize,
    pub trials_used: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<usize>>,
}

impl ObjectRecord {
    pub fn from_result(object_id: String, r: &ClassificationResult) -> Self {
        Self {
            object_id,
            candidates: r.candidates.clone(),
            mean_losses: r.mean_losses.clone(),
            posterior: r.posterior.clone(),
            predicted: r.predicted,
            trials_used: r.trials_used.clone(),
            votes: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_schedule;
    use crate::testsupport::{ConstantDenoiser, CountingDenoiser, KnownZ0Denoiser};
    use crate::views::Camera;

    fn sched10() -> NoiseSchedule {
        make_schedule(10, 1e-3, 0.2).unwrap()
    }

    #[test]
    fn oracle_denoiser_always_predicts_its_target() {
        let sched = sched10();
        let mut rng = rng_from(50);
        for trial in 0..8 {
            let z0: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target = trial % 3;
            let den = KnownZ0Denoiser {
                z0: z0.clone(),
                target,
                sched: sched.clone(),
                classes: 3,
            };
            let result =
                classify_latent(&den, &z0, &[0, 1, 2], 4, 900 + trial as u64, &sched).unwrap();
            assert_eq!(result.predicted, target);
            let sum: f64 = result.posterior.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_candidates_tie_break_to_lowest_id() {
        let sched = sched10();
        // Same constant output for both classes -> identical scores.
        let den = ConstantDenoiser {
            outputs: vec![vec![0.1, -0.2], vec![0.1, -0.2], vec![9.9, 9.9]],
        };
        let r = classify_latent(&den, &[0.5, 0.5], &[1, 0], 3, 7, &sched).unwrap();
        assert_eq!(r.mean_losses[0], r.mean_losses[1]);
        assert_eq!(r.predicted, 0);
    }

    #[test]
    fn classification_is_deterministic() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.0, 0.0], vec![0.5, 0.5]],
        };
        let a = classify_latent(&den, &[1.0, -1.0], &[0, 1], 1, 42, &sched).unwrap();
        let b = classify_latent(&den, &[1.0, -1.0], &[0, 1], 1, 42, &sched).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classify_latent_validates_inputs() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.0]],
        };
        assert!(classify_latent(&den, &[0.0], &[0], 4, 1, &sched).is_err());
        assert!(classify_latent(&den, &[0.0], &[0, 0], 0, 1, &sched).is_err());
    }

    #[test]
    fn posterior_fixtures() {
        let uniform = posterior(&[2.0, 2.0], &[0.5, 0.5]).unwrap();
        assert!((uniform[0] - 0.5).abs() < 1e-12);
        let dominant = posterior(&[0.0, 1000.0], &[0.5, 0.5]).unwrap();
        assert!((dominant[0] - 1.0).abs() < 1e-9);
        assert!(dominant[1] < 1e-9);
        let prior = posterior(&[3.0, 3.0], &[0.9, 0.1]).unwrap();
        assert!((prior[0] - 0.9).abs() < 1e-12);
        assert!((prior[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn posterior_validates_inputs() {
        assert!(posterior(&[f64::NAN, 0.0], &[0.5, 0.5]).is_err());
        assert!(posterior(&[0.0, 0.0], &[0.7, 0.7]).is_err());
        assert!(posterior(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(posterior(&[0.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn adaptive_single_stage_reduces_to_plain_classification() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.3, 0.1], vec![-0.4, 0.2], vec![0.9, -0.9]],
        };
        let z0 = [0.2, -0.6];
        let plain = classify_latent(&den, &z0, &[0, 1, 2], 5, 31, &sched).unwrap();
        let staged = classify_adaptive(
            &den,
            &z0,
            &[0, 1, 2],
            &[StageSpec { trials: 5, keep: 1 }],
            31,
            &sched,
        )
        .unwrap();
        assert_eq!(staged.predicted, plain.predicted);
        assert_eq!(staged.mean_losses, plain.mean_losses);
        assert_eq!(staged.trials_used, plain.trials_used);
    }

    #[test]
    fn adaptive_matches_hand_simulation() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.0, 0.0], vec![0.2, -0.1], vec![5.0, 5.0]],
        };
        let z0 = [0.4, 0.4];
        let stages = [StageSpec { trials: 2, keep: 2 }, StageSpec { trials: 2, keep: 1 }];
        let seed = 77;
        let result = classify_adaptive(&den, &z0, &[0, 1, 2], &stages, seed, &sched).unwrap();

        // Independent simulation of the stated rule on the same pairs.
        let pairs = draw_trial_pairs(seed, 4, &sched, 2);
        let mut sums = [0.0f64; 3];
        for c in 0..3 {
            for p in &pairs[0..2] {
                sums[c] += eps_loss(&den, &z0, c, p.t, &p.eps, &sched).unwrap();
            }
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| (sums[a] / 2.0).partial_cmp(&(sums[b] / 2.0)).unwrap());
        let survivors = &order[0..2];
        let mut totals = sums;
        for &c in survivors {
            for p in &pairs[2..4] {
                totals[c] += eps_loss(&den, &z0, c, p.t, &p.eps, &sched).unwrap();
            }
        }
        let winner = *survivors
            .iter()
            .min_by(|&&a, &&b| (totals[a] / 4.0).partial_cmp(&(totals[b] / 4.0)).unwrap())
            .unwrap();
        assert_eq!(result.predicted, winner);
        // Class 2 is constructed to lose stage one.
        assert_eq!(result.trials_used, vec![4, 4, 2]);
        for c in 0..3 {
            let expect = totals[c] / result.trials_used[c] as f64;
            assert!((result.mean_losses[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_validates_schedule_shape() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.0], vec![0.0]],
        };
        let bad_keep = [StageSpec { trials: 2, keep: 1 }, StageSpec { trials: 2, keep: 2 }];
        assert!(classify_adaptive(&den, &[0.0], &[0, 1], &bad_keep, 1, &sched).is_err());
        assert!(classify_adaptive(&den, &[0.0], &[0, 1], &[], 1, &sched).is_err());
        let zero_keep = [StageSpec { trials: 2, keep: 0 }];
        assert!(classify_adaptive(&den, &[0.0], &[0, 1], &zero_keep, 1, &sched).is_err());
        let oversized = [StageSpec { trials: 2, keep: 5 }];
        assert!(classify_adaptive(&den, &[0.0], &[0, 1], &oversized, 1, &sched).is_err());
    }

    #[test]
    fn adaptive_spends_fewer_evaluations_when_pruning() {
        let sched = sched10();
        let inner = ConstantDenoiser {
            outputs: vec![vec![0.0, 0.0], vec![0.2, 0.2], vec![5.0, 5.0]],
        };
        let counting = CountingDenoiser::new(inner);
        let stages = [StageSpec { trials: 2, keep: 2 }, StageSpec { trials: 2, keep: 1 }];
        classify_adaptive(&counting, &[0.1, 0.1], &[0, 1, 2], &stages, 3, &sched).unwrap();
        let evals = counting.calls();
        // 3 candidates x 2 trials, then 2 survivors x 2 trials.
        assert_eq!(evals, 10);
        assert!(evals < 4 * 3, "no saving over the flat budget");
    }

    #[test]
    fn binary_vote_follows_threshold_rule() {
        assert_eq!(majority_vote(&[1, 1, 0, 0, 1, 1], 2).unwrap(), 1);
        // Even split goes to the positive class.
        assert_eq!(majority_vote(&[1, 1, 1, 0, 0, 0], 2).unwrap(), 1);
        assert_eq!(majority_vote(&[0, 0, 0, 0, 1, 1], 2).unwrap(), 0);
        assert_eq!(majority_vote(&[0], 2).unwrap(), 0);
        assert_eq!(majority_vote(&[1], 2).unwrap(), 1);
    }

    #[test]
    fn multiway_vote_is_mode_with_low_tie_break() {
        assert_eq!(majority_vote(&[2, 0, 2, 1], 3).unwrap(), 2);
        assert_eq!(majority_vote(&[0, 0, 1, 1], 3).unwrap(), 0);
        assert!(majority_vote(&[], 3).is_err());
        assert!(majority_vote(&[5], 3).is_err());
    }

    #[test]
    fn vote_matches_exhaustive_binary_oracle() {
        for bits in 0u32..64 {
            let votes: Vec<usize> = (0..6).map(|i| ((bits >> i) & 1) as usize).collect();
            let ones = votes.iter().sum::<usize>();
            let oracle = usize::from(2 * ones >= 6);
            assert_eq!(majority_vote(&votes, 2).unwrap(), oracle, "votes {votes:?}");
        }
    }

    fn view_from_pixels(size: usize, pixels: Vec<f64>) -> DepthImage {
        DepthImage {
            size,
            pixels,
            camera: Camera::new(0.0, 20.0),
        }
    }

    /// Test denoiser with one prototype latent per class; exact noise
    /// recovery when the prototype matches the true source.
    struct KnownPrototypesDenoiser {
        protos: Vec<Vec<f64>>,
        sched: NoiseSchedule,
    }

    impl ConditionalDenoiser for KnownPrototypesDenoiser {
        fn latent_dim(&self) -> usize {
            self.protos[0].len()
        }
        fn num_classes(&self) -> usize {
            self.protos.len()
        }
        fn denoise(&self, z_t: &[f64], t: usize, class: usize) -> Result<Vec<f64>> {
            let (a, s) = (self.sched.alpha(t), self.sched.sigma(t));
            Ok(z_t
                .iter()
                .zip(&self.protos[class])
                .map(|(zt, p)| (zt - a * p) / s)
                .collect())
        }
    }

    #[test]
    fn multiview_votes_follow_per_view_content() {
        let sched = sched10();
        let size = 4;
        let dim = size * size;
        let proto0: Vec<f64> = (0..dim).map(|i| (i % 2) as f64).collect();
        let proto1: Vec<f64> = (0..dim).map(|i| ((i + 1) % 2) as f64).collect();
        let den = KnownPrototypesDenoiser {
            protos: vec![proto0.clone(), proto1.clone()],
            sched: sched.clone(),
        };
        let views: Vec<DepthImage> = [&proto1, &proto1, &proto1, &proto0, &proto0, &proto0]
            .iter()
            .map(|p| view_from_pixels(size, (*p).clone()))
            .collect();
        let record = classify_multiview(&den, &views, &[0, 1], 6, 5, &sched).unwrap();
        assert_eq!(record.per_view, vec![1, 1, 1, 0, 0, 0]);
        assert_eq!(record.final_vote, 1);

        let single = classify_multiview(&den, &views[3..4], &[0, 1], 6, 5, &sched).unwrap();
        assert_eq!(single.final_vote, single.per_view[0]);

        let same: Vec<DepthImage> =
            (0..5).map(|_| view_from_pixels(size, proto0.clone())).collect();
        let rec = classify_multiview(&den, &same, &[0, 1], 6, 5, &sched).unwrap();
        assert!(rec.per_view.iter().all(|&v| v == 0));
        assert_eq!(rec.final_vote, 0);
    }

    #[test]
    fn multiview_rejects_inconsistent_sizes() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.0; 16], vec![0.1; 16]],
        };
        let views = vec![
            view_from_pixels(4, vec![0.0; 16]),
            view_from_pixels(8, vec![0.0; 64]),
        ];
        assert!(matches!(
            classify_multiview(&den, &views, &[0, 1], 2, 1, &sched),
            Err(Error::DimensionMismatch(_))
        ));
    }

    /// Shared per-trial perturbations cancel from score differences: the
    /// cancellation paired sampling exists to provide.
    #[test]
    fn shared_trial_perturbations_cancel_in_score_differences() {
        let sched = sched10();
        let den = ConstantDenoiser {
            outputs: vec![vec![0.3, -0.1], vec![-0.2, 0.4], vec![0.0, 0.9]],
        };
        let z0 = [0.5, -0.5];
        let pairs = draw_trial_pairs(11, 8, &sched, 2);
        let mut rng = rng_from(12);
        let shared: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..5.0)).collect();
        let mut base = [0.0f64; 3];
        let mut perturbed = [0.0f64; 3];
        for c in 0..3 {
            for (j, p) in pairs.iter().enumerate() {
                let l = eps_loss(&den, &z0, c, p.t, &p.eps, &sched).unwrap();
                base[c] += l / 8.0;
                perturbed[c] += (l + shared[j]) / 8.0;
            }
        }
        let shift = perturbed[0] - base[0];
        for c in 1..3 {
            assert!((perturbed[c] - base[c] - shift).abs() < 1e-12);
        }
        let argmin = |s: &[f64; 3]| {
            (0..3)
                .min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap())
                .unwrap()
        };
        assert_eq!(argmin(&base), argmin(&perturbed));
    }

    #[test]
    fn paired_sampling_halves_score_difference_spread() {
        use crate::nets::DenoiserDims;
        use crate::train::{init_model, train_denoiser, ModelSpec, TrainConfig};
        // Small trained two-class model.
        let spec = ModelSpec {
            encoder: None,
            denoiser: DenoiserDims {
                latent: 4,
                hidden: 16,
                classes: 2,
                class_embed: 4,
                time_embed: 4,
                t_steps: 50,
            },
            beta_min: 1e-4,
            beta_max: 0.05,
        };
        let model = init_model(&spec, 5).unwrap();
        let data = vec![
            (vec![1.0, 1.0, -1.0, -1.0], 0),
            (vec![-1.0, -1.0, 1.0, 1.0], 1),
        ];
        let cfg = TrainConfig {
            steps: 200,
            batch_size: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let (den, _) = train_denoiser(model.denoiser, &model.schedule, &data, &cfg).unwrap();
        let z0 = &data[0].0;
        let n_trials = 16;
        let reruns = 100;
        let mut paired_diffs = Vec::with_capacity(reruns);
        let mut indep_diffs = Vec::with_capacity(reruns);
        for k in 0..reruns as u64 {
            let pairs = draw_trial_pairs(
                derive_seed(1000, &format!("paired/{k}")),
                n_trials,
                &model.schedule,
                4,
            );
            let l0 = score_with_pairs(&den, z0, 0, &pairs, &model.schedule).unwrap();
            let l1 = score_with_pairs(&den, z0, 1, &pairs, &model.schedule).unwrap();
            paired_diffs.push(l0 - l1);
            let pa = draw_trial_pairs(
                derive_seed(2000, &format!("indep/a/{k}")),
                n_trials,
                &model.schedule,
                4,
            );
            let pb = draw_trial_pairs(
                derive_seed(2000, &format!("indep/b/{k}")),
                n_trials,
                &model.schedule,
                4,
            );
            let la = score_with_pairs(&den, z0, 0, &pa, &model.schedule).unwrap();
            let lb = score_with_pairs(&den, z0, 1, &pb, &model.schedule).unwrap();
            indep_diffs.push(la - lb);
        }
        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let ratio = std(&indep_diffs) / std(&paired_diffs);
        assert!(ratio >= 2.0, "variance-reduction factor {ratio} below 2");
    }
}
