//! Labeled/unlabeled bookkeeping.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StoneError};
use crate::rng::{derived_rng, Stream};
use crate::types::{SceneCatalog, SceneId};

/// Split of the scene pool into labeled (D_L) and unlabeled (D_U) ids, with the labeled
/// class tallies and the running annotation cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    labeled: BTreeSet<SceneId>,
    unlabeled: BTreeSet<SceneId>,
    labeled_class_counts: Vec<u64>,
    labeled_box_total: u64,
    boxes_queried: u64,
    round_index: usize,
}

/// What a commit added to the labeled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitSummary {
    pub scenes_added: usize,
    pub boxes_added: u64,
    pub class_counts_added: Vec<u64>,
}

impl PoolState {
    /// Labels `initial_labeled` scenes drawn uniformly at random under `seed`.
    pub fn new(catalog: &SceneCatalog, initial_labeled: usize, seed: u64) -> Result<Self> {
        if catalog.is_empty() {
            return Err(StoneError::EmptySceneList);
        }
        if initial_labeled == 0 || initial_labeled >= catalog.len() {
            return Err(StoneError::InvalidInitialLabeled {
                requested: initial_labeled,
                available: catalog.len(),
            });
        }
        let mut ids: Vec<SceneId> = catalog.scenes().iter().map(|s| s.scene_id).collect();
        ids.sort_unstable();
        let mut rng = derived_rng(seed, Stream::InitialPool, 0, 0);
        ids.shuffle(&mut rng);

        let labeled: BTreeSet<SceneId> = ids[..initial_labeled].iter().copied().collect();
        let unlabeled: BTreeSet<SceneId> = ids[initial_labeled..].iter().copied().collect();
        let mut counts = vec![0u64; catalog.class_count()];
        for &id in &labeled {
            for (c, n) in catalog.get(id)?.class_counts(catalog.class_count()).iter().enumerate() {
                counts[c] += n;
            }
        }
        let total = counts.iter().sum();
        Ok(PoolState {
            labeled,
            unlabeled,
            labeled_class_counts: counts,
            labeled_box_total: total,
            boxes_queried: 0,
            round_index: 0,
        })
    }

    /// Builds a pool from an explicit labeled set; all other catalog scenes are unlabeled.
    pub fn from_labeled(catalog: &SceneCatalog, labeled: &[SceneId]) -> Result<Self> {
        let mut counts = vec![0u64; catalog.class_count()];
        let mut labeled_set = BTreeSet::new();
        for &id in labeled {
            let scene = catalog.get(id)?;
            if !labeled_set.insert(id) {
                return Err(StoneError::DuplicateScene(id));
            }
            for (c, n) in scene.class_counts(catalog.class_count()).iter().enumerate() {
                counts[c] += n;
            }
        }
        let unlabeled = catalog
            .scenes()
            .iter()
            .map(|s| s.scene_id)
            .filter(|id| !labeled_set.contains(id))
            .collect();
        let total = counts.iter().sum();
        Ok(PoolState {
            labeled: labeled_set,
            unlabeled,
            labeled_class_counts: counts,
            labeled_box_total: total,
            boxes_queried: 0,
            round_index: 0,
        })
    }

    /// Moves `selected` into the labeled set using ground-truth counts. The pool is left
    /// untouched when any id is not currently unlabeled.
    pub fn commit(&mut self, selected: &[SceneId], catalog: &SceneCatalog) -> Result<CommitSummary> {
        let mut seen = BTreeSet::new();
        for &id in selected {
            if !self.unlabeled.contains(&id) || !seen.insert(id) {
                return Err(StoneError::NotUnlabeled(id));
            }
        }
        let class_count = self.labeled_class_counts.len();
        let mut added = vec![0u64; class_count];
        for &id in selected {
            let scene = catalog.get(id)?;
            for (c, n) in scene.class_counts(class_count).iter().enumerate() {
                added[c] += n;
            }
        }
        let boxes_added: u64 = added.iter().sum();
        for &id in selected {
            self.unlabeled.remove(&id);
            self.labeled.insert(id);
        }
        for (c, n) in added.iter().enumerate() {
            self.labeled_class_counts[c] += n;
        }
        self.labeled_box_total += boxes_added;
        self.boxes_queried += boxes_added;
        self.round_index += 1;
        Ok(CommitSummary {
            scenes_added: selected.len(),
            boxes_added,
            class_counts_added: added,
        })
    }

    pub fn labeled(&self) -> &BTreeSet<SceneId> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<SceneId> {
        &self.unlabeled
    }

    pub fn labeled_class_counts(&self) -> &[u64] {
        &self.labeled_class_counts
    }

    pub fn labeled_box_total(&self) -> u64 {
        self.labeled_box_total
    }

    pub fn boxes_queried(&self) -> u64 {
        self.boxes_queried
    }

    pub fn round_index(&self) -> usize {
        self.round_index
    }

    pub fn class_count(&self) -> usize {
        self.labeled_class_counts.len()
    }

    /// Checks disjointness and count consistency.
    pub fn check_invariants(&self) -> bool {
        self.labeled.is_disjoint(&self.unlabeled)
            && self.labeled_box_total == self.labeled_class_counts.iter().sum::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BoxAnnotation, ClassId, Difficulty, Scene, REG_DIM};
    use proptest::prelude::*;

    fn scene(id: u64, classes: &[usize]) -> Scene {
        Scene {
            scene_id: SceneId(id),
            boxes: classes
                .iter()
                .map(|&c| BoxAnnotation {
                    class_id: ClassId(c),
                    difficulty: Difficulty::Moderate,
                    reg_target: [0.0; REG_DIM],
                })
                .collect(),
            features: classes.iter().map(|_| vec![1.0]).collect(),
        }
    }

    fn catalog(n: u64) -> SceneCatalog {
        let scenes = (0..n).map(|i| scene(i, &[(i % 2) as usize, 0])).collect();
        SceneCatalog::new(scenes, 2, 1).unwrap()
    }

    #[test]
    fn new_pool_rejects_bad_initial_sizes() {
        let cat = catalog(10);
        assert!(PoolState::new(&cat, 0, 1).is_err());
        assert!(PoolState::new(&cat, 10, 1).is_err());
        let empty = SceneCatalog::new(vec![], 2, 1).unwrap();
        assert_eq!(PoolState::new(&empty, 1, 1).unwrap_err(), StoneError::EmptySceneList);
    }

    #[test]
    fn new_pool_splits_and_is_deterministic() {
        let cat = catalog(10);
        let pool = PoolState::new(&cat, 3, 42).unwrap();
        assert_eq!(pool.labeled().len(), 3);
        assert_eq!(pool.unlabeled().len(), 7);
        assert!(pool.check_invariants());
        assert_eq!(pool, PoolState::new(&cat, 3, 42).unwrap());
        let expected: u64 = pool
            .labeled()
            .iter()
            .map(|&id| cat.get(id).unwrap().box_count() as u64)
            .sum();
        assert_eq!(pool.labeled_box_total(), expected);
    }

    #[test]
    fn commit_updates_counts() {
        let scenes = vec![scene(0, &[0, 0, 0, 0, 1]), scene(1, &[1, 1]), scene(2, &[0])];
        let cat = SceneCatalog::new(scenes, 2, 1).unwrap();
        let mut pool = PoolState::from_labeled(&cat, &[SceneId(0)]).unwrap();
        assert_eq!(pool.labeled_class_counts(), &[4, 1]);
        assert_eq!(pool.labeled_box_total(), 5);
        let summary = pool.commit(&[SceneId(1)], &cat).unwrap();
        assert_eq!(pool.labeled_class_counts(), &[4, 3]);
        assert_eq!(pool.labeled_box_total(), 7);
        assert_eq!(summary.boxes_added, 2);
        assert_eq!(pool.boxes_queried(), 2);
        assert_eq!(pool.round_index(), 1);
    }

    #[test]
    fn empty_commit_only_advances_round() {
        let cat = catalog(4);
        let mut pool = PoolState::new(&cat, 2, 0).unwrap();
        let before = pool.clone();
        pool.commit(&[], &cat).unwrap();
        assert_eq!(pool.labeled(), before.labeled());
        assert_eq!(pool.labeled_class_counts(), before.labeled_class_counts());
        assert_eq!(pool.round_index(), 1);
    }

    #[test]
    fn committing_labeled_id_fails_without_side_effects() {
        let cat = catalog(5);
        let mut pool = PoolState::new(&cat, 2, 9).unwrap();
        let labeled = *pool.labeled().iter().next().unwrap();
        let unlabeled = *pool.unlabeled().iter().next().unwrap();
        let before = pool.clone();
        assert_eq!(
            pool.commit(&[unlabeled, labeled], &cat).unwrap_err(),
            StoneError::NotUnlabeled(labeled)
        );
        assert_eq!(pool, before);
    }

    proptest! {
        #[test]
        fn invariants_hold_over_random_commit_sequences(
            seed in any::<u64>(),
            picks in proptest::collection::vec(proptest::collection::vec(0usize..40, 0..5), 0..8),
        ) {
            let cat = catalog(40);
            let mut pool = PoolState::new(&cat, 5, seed).unwrap();
            let mut prev_counts = pool.labeled_class_counts().to_vec();
            for round in picks {
                let unl: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
                if unl.is_empty() { break; }
                let mut sel: Vec<SceneId> = round.iter().map(|&i| unl[i % unl.len()]).collect();
                sel.sort();
                sel.dedup();
                pool.commit(&sel, &cat).unwrap();
                prop_assert!(pool.check_invariants());
                prop_assert_eq!(pool.labeled().len() + pool.unlabeled().len(), 40);
                for (a, b) in prev_counts.iter().zip(pool.labeled_class_counts()) {
                    prop_assert!(a <= b);
                }
                prev_counts = pool.labeled_class_counts().to_vec();
            }
        }
    }
}
