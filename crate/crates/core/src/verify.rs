//! Self-check battery run by `stone check`: randomized trials of the numerical
//! invariants the selection relies on. Needs no external inputs.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EmbeddingConfig, GradientAggregation, SubmodularKind};
use crate::math::{log_sum_exp, softmax_entropy};
use crate::oracle::{gradient_embedding, predict_scene_mc, scene_loss, GradientEmbedding, SurrogateHead};
use crate::reweigh::{balanced_cls_loss, MarginVector};
use crate::submodular::{
    brute_force_opt, greedy_maximize, lazy_greedy_maximize, log_link, GroundSet,
    SubmodularFunction,
};
use crate::types::{BoxAnnotation, ClassId, Difficulty, Scene, SceneId, REG_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Battery parameters. `link` is the concave link used by the feature-based function;
/// swapping it for a convex one must make the submodularity check fail.
#[derive(Debug, Clone, Copy)]
pub struct BatteryConfig {
    pub seed: u64,
    pub link: fn(f64) -> f64,
    pub submodularity_pairs: usize,
    pub greedy_instances: usize,
    pub lazy_instances: usize,
    pub gradient_configs: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 0x5709e,
            link: log_link,
            submodularity_pairs: 1000,
            greedy_instances: 50,
            lazy_instances: 200,
            gradient_configs: 100,
        }
    }
}

pub fn run_battery(config: &BatteryConfig) -> Vec<CheckOutcome> {
    vec![
        check_submodularity(config),
        check_greedy_ratio(config),
        check_lazy_matches_naive(config),
        check_gradients(config),
        check_margin_shift(config),
        check_entropy_bounds(config),
    ]
}

fn random_ground(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GroundSet {
    GroundSet::new(
        (0..n)
            .map(|i| GradientEmbedding {
                scene_id: SceneId(i as u64),
                grad: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect(),
    )
    .expect("well-formed random ground set")
}

fn random_subset(rng: &mut ChaCha8Rng, ground: &GroundSet) -> Vec<SceneId> {
    ground
        .items()
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.5))
        .collect()
}

fn check_submodularity(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kinds = [
        SubmodularKind::FeatureBased,
        SubmodularKind::FacilityLocation,
        SubmodularKind::MaxCoverage,
    ];
    let mut failures = Vec::new();
    for kind in kinds {
        let f = SubmodularFunction::new(kind).with_link(config.link);
        for _ in 0..config.submodularity_pairs {
            let n = rng.random_range(2..=10);
            let d = rng.random_range(1..=8);
            let ground = random_ground(&mut rng, n, d);
            let a = random_subset(&mut rng, &ground);
            let b = random_subset(&mut rng, &ground);
            let union: Vec<SceneId> = a.iter().chain(&b).copied().sorted().dedup().collect();
            let inter: Vec<SceneId> = a.iter().copied().filter(|x| b.contains(x)).collect();
            let eval = |s: &[SceneId]| f.evaluate(&ground, s).expect("ids from ground");
            let lhs = eval(&a) + eval(&b);
            let rhs = eval(&union) + eval(&inter);
            if lhs < rhs - 1e-9 {
                failures.push(format!("{kind:?}: f(A)+f(B)={lhs} < {rhs}"));
            }
            if let Some(x) = ground.items().iter().find(|x| !a.contains(x)) {
                let mut grown = a.clone();
                grown.push(*x);
                if eval(&a) > eval(&grown) + 1e-12 {
                    failures.push(format!("{kind:?}: not monotone"));
                }
            }
        }
    }
    outcome("submodularity", &failures, config.submodularity_pairs * kinds.len())
}

fn check_greedy_ratio(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 1);
    let bound = 1.0 - (-1f64).exp();
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for kind in [SubmodularKind::FacilityLocation, SubmodularKind::FeatureBased] {
        let f = SubmodularFunction::new(kind).with_link(config.link);
        for _ in 0..config.greedy_instances {
            let n = rng.random_range(4..=12);
            let k = rng.random_range(1..=4);
            let d = rng.random_range(1..=8);
            let ground = random_ground(&mut rng, n, d);
            let picked = greedy_maximize(&f, &ground, k).expect("k <= n");
            let value = f.evaluate(&ground, &picked).expect("ids from ground");
            let (_, opt) = brute_force_opt(&f, &ground, k).expect("small ground set");
            if opt > 0.0 {
                worst = worst.min(value / opt);
            }
            if value < bound * opt - 1e-9 {
                failures.push(format!("{kind:?}: greedy {value} < (1-1/e) * {opt}"));
            }
        }
    }
    let mut out = outcome("greedy-ratio", &failures, 2 * config.greedy_instances);
    if out.passed {
        out.detail = format!("{}; worst ratio {worst:.4}", out.detail);
    }
    out
}

fn check_lazy_matches_naive(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 2);
    let mut failures = Vec::new();
    for i in 0..config.lazy_instances {
        let kind = SubmodularKind::ALL[i % SubmodularKind::ALL.len()];
        let f = SubmodularFunction::new(kind)
            .with_link(config.link)
            .with_tau(rng.random_range(0.6..0.95));
        let n = rng.random_range(1..=40);
        let d = rng.random_range(1..=10);
        let k = rng.random_range(0..=n);
        let ground = random_ground(&mut rng, n, d);
        let naive = greedy_maximize(&f, &ground, k).expect("k <= n");
        let lazy = lazy_greedy_maximize(&f, &ground, k).expect("k <= n");
        if naive != lazy {
            failures.push(format!("{kind:?} instance {i}: sequences differ"));
        }
    }
    outcome("lazy-equals-naive", &failures, config.lazy_instances)
}

fn random_scene(rng: &mut ChaCha8Rng, class_count: usize, d: usize) -> Scene {
    let n = rng.random_range(1..=6);
    Scene {
        scene_id: SceneId(rng.random_range(0..1000)),
        boxes: (0..n)
            .map(|_| BoxAnnotation {
                class_id: ClassId(rng.random_range(0..class_count)),
                difficulty: Difficulty::Moderate,
                reg_target: [0.0; REG_DIM],
            })
            .collect(),
        features: (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
    }
}

fn check_gradients(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 3);
    let step = 1e-5;
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for trial in 0..config.gradient_configs {
        let class_count = rng.random_range(2..=4);
        let d = rng.random_range(1..=5);
        let mut head = SurrogateHead::zeros(class_count, d, 0.2);
        for w in head.cls_weights.iter_mut().chain(head.reg_weights.iter_mut()) {
            *w = rng.random_range(-1.5..1.5);
        }
        let scene = random_scene(&mut rng, class_count, d);
        let counts: Vec<u64> = (0..class_count).map(|_| rng.random_range(0..30)).collect();
        let emb = EmbeddingConfig {
            reweighing: trial % 2 == 0,
            aggregation: if trial % 4 < 2 {
                GradientAggregation::Sum
            } else {
                GradientAggregation::Mean
            },
        };
        let mc = predict_scene_mc(&head, &scene, 5, trial as u64).expect("dims match");
        let analytic = gradient_embedding(&head, &scene, &mc, &counts, &emb).expect("dims match");
        let cls_len = head.cls_weights.len();
        for i in 0..head.param_count() {
            let mut plus = head.clone();
            let mut minus = head.clone();
            let (p, m) = if i < cls_len {
                (&mut plus.cls_weights[i], &mut minus.cls_weights[i])
            } else {
                (&mut plus.reg_weights[i - cls_len], &mut minus.reg_weights[i - cls_len])
            };
            *p += step;
            *m -= step;
            let fd = (scene_loss(&plus, &scene, &mc, &counts, &emb).expect("dims")
                - scene_loss(&minus, &scene, &mc, &counts, &emb).expect("dims"))
                / (2.0 * step);
            let err = (fd - analytic.grad[i]).abs();
            worst = worst.max(err);
            if err >= 1e-6 {
                failures.push(format!("config {trial}, param {i}: |fd - analytic| = {err:e}"));
            }
        }
    }
    let mut out = outcome("gradient-finite-difference", &failures, config.gradient_configs);
    if out.passed {
        out.detail = format!("{}; max error {worst:.2e}", out.detail);
    }
    out
}

fn check_margin_shift(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 4);
    let mut failures = Vec::new();
    for trial in 0..100 {
        let class_count = rng.random_range(2..=6);
        let boxes = rng.random_range(1..=5);
        let logits: Vec<Vec<f64>> = (0..boxes)
            .map(|_| (0..class_count).map(|_| rng.random_range(-8.0..8.0)).collect())
            .collect();
        let labels: Vec<ClassId> = (0..boxes)
            .map(|_| ClassId(rng.random_range(0..class_count)))
            .collect();
        let kappa = rng.random_range(0.01..2.0);
        let margins = MarginVector {
            margins: vec![kappa; class_count],
        };
        let shifted = balanced_cls_loss(&labels, &logits, &margins).expect("valid");
        let plain = labels
            .iter()
            .zip(&logits)
            .map(|(y, z)| log_sum_exp(z) - z[y.index()])
            .sum::<f64>()
            / boxes as f64;
        if (shifted - plain).abs() > 1e-12 {
            failures.push(format!("set {trial}: {shifted} vs {plain}"));
        }
    }
    outcome("margin-shift-identity", &failures, 100)
}

fn check_entropy_bounds(config: &BatteryConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 5);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let c = rng.random_range(2..=6);
        let ratios: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = softmax_entropy(&ratios);
        let ln_c = (c as f64).ln();
        if !(0.0..=ln_c + 1e-12).contains(&h) {
            failures.push(format!("trial {trial}: H = {h} outside [0, ln {c}]"));
        }
        let mut reversed = ratios.clone();
        reversed.reverse();
        if softmax_entropy(&reversed) != h {
            failures.push(format!("trial {trial}: not permutation invariant"));
        }
        if softmax_entropy(&vec![ratios[0]; c]) != ln_c {
            failures.push(format!("trial {trial}: constant input is not exactly ln C"));
        }
    }
    outcome("entropy-bounds", &failures, 1000)
}

fn outcome(name: &'static str, failures: &[String], trials: usize) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{trials} trials"),
            Some(first) => format!("{} of {trials} trials failed; first: {first}", failures.len()),
        },
    }
}
