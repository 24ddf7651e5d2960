//! Permutation variation operators, assortative mating and task assignment.

use rand::Rng;

use super::population::Individual;
use super::Strategy;
use crate::decode::Permutation;

/// Two-point crossover with an explicit window `[i, j)`.
///
/// The first child keeps `p1[i..j]` in place and fills the other positions
/// left to right with the remaining genes in `p2` order; the second child
/// swaps the parents' roles.
pub fn two_point_crossover_at(p1: &Permutation, p2: &Permutation, i: usize, j: usize) -> (Permutation, Permutation) {
    assert_eq!(p1.len(), p2.len(), "parents differ in length");
    assert!(i < j && j <= p1.len(), "invalid window [{i}, {j})");
    (
        fill_window(p1.as_slice(), p2.as_slice(), i, j),
        fill_window(p2.as_slice(), p1.as_slice(), i, j),
    )
}

fn fill_window(keep: &[usize], donor: &[usize], i: usize, j: usize) -> Permutation {
    let n = keep.len();
    let mut kept = vec![false; n];
    for &g in &keep[i..j] {
        kept[g] = true;
    }
    let mut fill = donor.iter().copied().filter(|g| !kept[*g]);
    let child = (0..n)
        .map(|pos| {
            if (i..j).contains(&pos) {
                keep[pos]
            } else {
                fill.next().expect("donor has the missing genes")
            }
        })
        .collect();
    Permutation::from_vec_unchecked(child)
}

/// Two-point crossover with cut points drawn uniformly, `0 <= i < j <= n`.
pub fn two_point_crossover<R: Rng + ?Sized>(
    p1: &Permutation,
    p2: &Permutation,
    rng: &mut R,
) -> (Permutation, Permutation) {
    let n = p1.len();
    if n == 0 {
        return (p1.clone(), p2.clone());
    }
    let a = rng.random_range(0..=n);
    let mut b = rng.random_range(0..n);
    if b >= a {
        b += 1;
    }
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    two_point_crossover_at(p1, p2, i, j)
}

/// Swaps positions `a` and `b`.
pub fn swap_at(p: &Permutation, a: usize, b: usize) -> Permutation {
    let mut v = p.as_slice().to_vec();
    v.swap(a, b);
    Permutation::from_vec_unchecked(v)
}

/// Swaps two distinct, uniformly drawn positions. Length < 2 is returned as is.
pub fn swap_mutation<R: Rng + ?Sized>(p: &Permutation, rng: &mut R) -> Permutation {
    let n = p.len();
    if n < 2 {
        return p.clone();
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    swap_at(p, a, b)
}

/// How a child was produced, carrying the parents' skill factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lineage {
    Crossover { skill_a: usize, skill_b: usize },
    Mutation { skill: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Child {
    pub permutation: Permutation,
    pub lineage: Lineage,
}

fn two_distinct<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// One pairing: two distinct parents drawn uniformly; crossover when their
/// skill factors agree or with probability `rmp`, otherwise each parent is
/// swap-mutated. Always yields two children.
pub fn mate_pair<R: Rng + ?Sized>(population: &[Individual], rmp: f64, rng: &mut R) -> [Child; 2] {
    let (a, b) = two_distinct(population.len(), rng);
    let (pa, pb) = (&population[a], &population[b]);
    let roll: f64 = rng.random();
    if pa.skill == pb.skill || roll < rmp {
        let (c1, c2) = two_point_crossover(&pa.permutation, &pb.permutation, rng);
        let lineage = Lineage::Crossover {
            skill_a: pa.skill,
            skill_b: pb.skill,
        };
        [
            Child {
                permutation: c1,
                lineage,
            },
            Child {
                permutation: c2,
                lineage,
            },
        ]
    } else {
        [
            Child {
                permutation: swap_mutation(&pa.permutation, rng),
                lineage: Lineage::Mutation { skill: pa.skill },
            },
            Child {
                permutation: swap_mutation(&pb.permutation, rng),
                lineage: Lineage::Mutation { skill: pb.skill },
            },
        ]
    }
}

/// Repeats [`mate_pair`] until `population.len()` children exist.
pub fn assortative_mating<R: Rng + ?Sized>(population: &[Individual], rmp: f64, rng: &mut R) -> Vec<Child> {
    let m = population.len();
    let mut out = Vec::with_capacity(m + 1);
    while out.len() < m {
        out.extend(mate_pair(population, rmp, rng));
    }
    out.truncate(m);
    out
}

/// Adjacent tasks on the segment chain (0-based indices).
pub fn neighbors(task: usize, k: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(2);
    if task > 0 {
        v.push(task - 1);
    }
    if task + 1 < k {
        v.push(task + 1);
    }
    v
}

/// Vertical cultural transmission: the child imitates one parent's skill
/// (fair coin for two parents), then the strategy widens the set of tasks
/// it is evaluated on. Returns `(inherited skill, sorted eval set)`.
pub fn assign_eval_tasks<R: Rng + ?Sized>(
    lineage: Lineage,
    strategy: Strategy,
    k: usize,
    rng: &mut R,
) -> (usize, Vec<usize>) {
    let inherited = match lineage {
        Lineage::Crossover { skill_a, skill_b } => {
            if rng.random::<f64>() < 0.5 {
                skill_a
            } else {
                skill_b
            }
        }
        Lineage::Mutation { skill } => skill,
    };
    let eval_set = match strategy {
        Strategy::Vertical => vec![inherited],
        Strategy::NeighborTasks => {
            let mut v = neighbors(inherited, k);
            v.push(inherited);
            v.sort_unstable();
            v
        }
        Strategy::AllTasks => (0..k).collect(),
    };
    (inherited, eval_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Strategy;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn crossover_keeps_window_and_fills_in_donor_order() {
        // genes are 1-based in the textbook example; shift to 0-based
        let p1 = perm(&[3, 2, 4, 0, 1]);
        let p2 = perm(&[0, 4, 3, 1, 2]);
        let (c1, c2) = two_point_crossover_at(&p1, &p2, 0, 2);
        assert_eq!(c1.as_slice(), &[3, 2, 0, 4, 1]); // [4,3,1,5,2] in 1-based ids
        assert_eq!(c2.as_slice(), &[0, 4, 3, 2, 1]);
        let (f1, f2) = two_point_crossover_at(&p1, &p2, 0, 5);
        assert_eq!((f1, f2), (p1, p2));
    }

    #[test]
    fn swap_textbook() {
        // [4,3,5,1,2] swapping values 2 and 4 -> [2,3,5,1,4]
        let p = perm(&[3, 2, 4, 0, 1]);
        assert_eq!(swap_at(&p, 0, 4).as_slice(), &[1, 2, 4, 0, 3]);
    }

    #[test]
    fn neighbor_sets() {
        assert_eq!(neighbors(1, 4), vec![0, 2]);
        assert_eq!(neighbors(0, 4), vec![1]);
        assert_eq!(neighbors(3, 4), vec![2]);
        assert!(neighbors(0, 1).is_empty());
    }

    #[test]
    fn eval_task_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Lineage::Mutation { skill: 1 };
        assert_eq!(assign_eval_tasks(l, Strategy::Vertical, 4, &mut rng), (1, vec![1]));
        assert_eq!(
            assign_eval_tasks(l, Strategy::NeighborTasks, 4, &mut rng),
            (1, vec![0, 1, 2])
        );
        let l = Lineage::Mutation { skill: 0 };
        assert_eq!(
            assign_eval_tasks(l, Strategy::NeighborTasks, 4, &mut rng),
            (0, vec![0, 1])
        );
        assert_eq!(
            assign_eval_tasks(l, Strategy::AllTasks, 4, &mut rng),
            (0, vec![0, 1, 2, 3])
        );
        let mut seen = [0usize; 4];
        for _ in 0..400 {
            let (t, _) = assign_eval_tasks(
                Lineage::Crossover { skill_a: 0, skill_b: 3 },
                Strategy::Vertical,
                4,
                &mut rng,
            );
            seen[t] += 1;
        }
        assert_eq!(seen[1] + seen[2], 0);
        assert!(seen[0] > 150 && seen[3] > 150, "{seen:?}");
    }

    fn individuals(skills: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<Individual> {
        skills
            .iter()
            .map(|&s| {
                let mut ind = Individual::new(Permutation::random(n, rng), 4);
                ind.skill = s;
                ind
            })
            .collect()
    }

    #[test]
    fn mating_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = individuals(&[0, 1, 2, 3, 0, 1], 8, &mut rng);
        // distinct skills are common here; rmp = 0 must then mutate
        let mut saw_mutation = false;
        for _ in 0..200 {
            let kids = assortative_mating(&pop, 0.0, &mut rng);
            assert_eq!(kids.len(), 6);
            for k in &kids {
                match k.lineage {
                    Lineage::Crossover { skill_a, skill_b } => assert_eq!(skill_a, skill_b),
                    Lineage::Mutation { .. } => saw_mutation = true,
                }
            }
        }
        assert!(saw_mutation);
        for _ in 0..200 {
            let kids = assortative_mating(&pop, 1.0, &mut rng);
            assert!(kids.iter().all(|k| matches!(k.lineage, Lineage::Crossover { .. })));
        }
    }

    proptest! {
        #[test]
        fn operators_preserve_bijection(n in 1usize..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p1 = Permutation::random(n, &mut rng);
            let p2 = Permutation::random(n, &mut rng);
            let (c1, c2) = two_point_crossover(&p1, &p2, &mut rng);
            prop_assert!(Permutation::is_bijection(c1.as_slice()));
            prop_assert!(Permutation::is_bijection(c2.as_slice()));
            let m = swap_mutation(&p1, &mut rng);
            prop_assert!(Permutation::is_bijection(m.as_slice()));
            if n >= 2 {
                let diff = m.as_slice().iter().zip(p1.as_slice()).filter(|(a, b)| a != b).count();
                prop_assert_eq!(diff, 2);
            }
        }
    }
}
