//! Cardinality-constrained greedy maximization.
//!
//! Both maximizers pick, at every step, the item with the largest marginal gain and break
//! exact ties toward the lowest scene id. The lazy variant keeps stale gains in a max-heap
//! as upper bounds (valid by diminishing returns) and only re-evaluates what can still win,
//! so it returns the same sequence as the naive loop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use itertools::Itertools;

use super::{GroundSet, SubmodularFunction};
use crate::error::{Result, StoneError};
use crate::types::SceneId;

/// Largest ground set `brute_force_opt` accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

fn check_k(ground: &GroundSet, k: usize) -> Result<()> {
    if k > ground.len() {
        return Err(StoneError::SelectionTooLarge {
            requested: k,
            available: ground.len(),
        });
    }
    Ok(())
}

#[inline]
fn beats(gain: f64, id: SceneId, best_gain: f64, best_id: SceneId) -> bool {
    gain > best_gain || (gain == best_gain && id < best_id)
}

/// Naive greedy: evaluates every remaining item at every step.
pub fn greedy_maximize(
    f: &SubmodularFunction,
    ground: &GroundSet,
    k: usize,
) -> Result<Vec<SceneId>> {
    check_k(ground, k)?;
    let prepared = f.prepare(ground);
    let mut state = prepared.empty_state();
    let mut taken = vec![false; ground.len()];
    let mut order = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..ground.len()).filter(|&i| !taken[i]) {
            let gain = prepared.gain(&state, i);
            let better = match best {
                None => true,
                Some((b, bg)) => beats(gain, ground.items[i], bg, ground.items[b]),
            };
            if better {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("k <= |ground| leaves a candidate");
        taken[i] = true;
        prepared.add(&mut state, i);
        order.push(ground.items[i]);
    }
    Ok(order)
}

struct Entry {
    gain: f64,
    id: SceneId,
    index: usize,
    /// Greedy step at which `gain` was computed.
    step: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Slack allowed for floating-point drift in stale upper bounds.
fn drift_tolerance(gain: f64) -> f64 {
    1e-9 * gain.abs().max(1.0)
}

/// Lazy (accelerated) greedy with the same output as [`greedy_maximize`].
pub fn lazy_greedy_maximize(
    f: &SubmodularFunction,
    ground: &GroundSet,
    k: usize,
) -> Result<Vec<SceneId>> {
    check_k(ground, k)?;
    let prepared = f.prepare(ground);
    let mut state = prepared.empty_state();
    let mut heap: BinaryHeap<Entry> = (0..ground.len())
        .map(|i| Entry {
            gain: prepared.gain(&state, i),
            id: ground.items[i],
            index: i,
            step: 0,
        })
        .collect();
    let mut order = Vec::with_capacity(k);

    for step in 0..k {
        let refresh = |e: &mut Entry, state: &super::GainState| {
            e.gain = prepared.gain(state, e.index);
            e.step = step;
        };
        loop {
            let mut top = heap.pop().expect("k <= |ground| leaves a candidate");
            if top.step != step {
                refresh(&mut top, &state);
                heap.push(top);
                continue;
            }
            // Stale bounds within rounding distance of the leader could still overtake it.
            let floor = top.gain - drift_tolerance(top.gain);
            let mut near = Vec::new();
            let mut refreshed = false;
            while heap.peek().is_some_and(|e| e.gain >= floor) {
                let mut e = heap.pop().unwrap();
                if e.step != step {
                    refresh(&mut e, &state);
                    refreshed = true;
                }
                near.push(e);
            }
            heap.extend(near);
            if refreshed {
                heap.push(top);
                continue;
            }
            prepared.add(&mut state, top.index);
            order.push(top.id);
            break;
        }
    }
    Ok(order)
}

/// Exact optimum over all `k`-subsets; for test oracles on small ground sets.
/// Returns the first optimal subset in lexicographic position order.
pub fn brute_force_opt(
    f: &SubmodularFunction,
    ground: &GroundSet,
    k: usize,
) -> Result<(Vec<SceneId>, f64)> {
    if ground.len() > BRUTE_FORCE_LIMIT {
        return Err(StoneError::GroundSetTooLarge(ground.len()));
    }
    check_k(ground, k)?;
    let prepared = f.prepare(ground);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..ground.len()).combinations(k) {
        let value = prepared.evaluate_indices(&subset);
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((subset, value));
        }
    }
    let (subset, value) = best.expect("at least one subset");
    Ok((subset.into_iter().map(|i| ground.items[i]).collect(), value))
}

#[cfg(test)]
mod tests {
    use super::super::tests::ground;
    use super::*;
    use crate::config::SubmodularKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ground(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GroundSet {
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        ground(&vectors)
    }

    #[test]
    fn k_zero_and_oversized_k() {
        let g = ground(&[vec![1.0], vec![2.0]]);
        let f = SubmodularFunction::new(SubmodularKind::FeatureBased);
        assert!(greedy_maximize(&f, &g, 0).unwrap().is_empty());
        assert!(lazy_greedy_maximize(&f, &g, 0).unwrap().is_empty());
        assert!(matches!(
            greedy_maximize(&f, &g, 3),
            Err(StoneError::SelectionTooLarge { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn literal_form_selects_top_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_ground(&mut rng, 12, 5);
        let f = SubmodularFunction::new(SubmodularKind::LiteralEq5);
        let mut by_score: Vec<(f64, SceneId)> = g
            .items()
            .iter()
            .enumerate()
            .map(|(i, &id)| (super::super::log_link(super::super::mu(g.embedding(i))), id))
            .collect();
        by_score.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top: Vec<SceneId> = by_score.iter().take(5).map(|x| x.1).collect();
        assert_eq!(greedy_maximize(&f, &g, 5).unwrap(), top);
        assert_eq!(lazy_greedy_maximize(&f, &g, 5).unwrap(), top);
    }

    #[test]
    fn full_k_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_ground(&mut rng, 9, 4);
        for kind in SubmodularKind::ALL {
            let f = SubmodularFunction::new(kind);
            let mut order = lazy_greedy_maximize(&f, &g, 9).unwrap();
            order.sort();
            assert_eq!(order, g.items().to_vec());
        }
    }

    #[test]
    fn ties_go_to_lowest_id() {
        // identical embeddings: every gain ties at every step
        let g = ground(&vec![vec![1.0, 1.0]; 4]);
        for kind in SubmodularKind::ALL {
            let f = SubmodularFunction::new(kind);
            let expected = vec![SceneId(0), SceneId(1)];
            assert_eq!(greedy_maximize(&f, &g, 2).unwrap(), expected);
            assert_eq!(lazy_greedy_maximize(&f, &g, 2).unwrap(), expected);
        }
    }

    #[test]
    fn brute_force_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_ground(&mut rng, 6, 3);
        let f = SubmodularFunction::new(SubmodularKind::FacilityLocation);
        let (all, _) = brute_force_opt(&f, &g, 6).unwrap();
        assert_eq!(all, g.items().to_vec());
        let (best1, v1) = brute_force_opt(&f, &g, 1).unwrap();
        for &id in g.items() {
            assert!(f.evaluate(&g, &[id]).unwrap() <= v1);
        }
        assert_eq!(f.evaluate(&g, &best1).unwrap(), v1);
        let big = random_ground(&mut rng, 21, 2);
        assert_eq!(brute_force_opt(&f, &big, 2).unwrap_err(), StoneError::GroundSetTooLarge(21));
    }

    #[test]
    fn lazy_matches_naive_on_pipeline_sized_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in SubmodularKind::ALL {
            let g = random_ground(&mut rng, 150, 20);
            let f = SubmodularFunction::new(kind).with_tau(0.75);
            assert_eq!(
                greedy_maximize(&f, &g, 40).unwrap(),
                lazy_greedy_maximize(&f, &g, 40).unwrap(),
                "{kind:?}"
            );
        }
    }
}
