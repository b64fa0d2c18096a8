//! Brute-force oracles and property tests for the graph algebra, alignment
//! and file formats.

use orbilearn::alignment::{self, SolverConfig};
use orbilearn::io;
use orbilearn::learners::{self, AdalineModel, Codebook};
use orbilearn::{AttributedGraph, Permutation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, order: usize, dim: usize, undirected: bool) -> AttributedGraph {
    let vertices: Vec<Vec<f64>> = (0..order)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut edges = Vec::new();
    for i in 0..order {
        for j in 0..order {
            if i == j || (undirected && j < i) || !rng.random_bool(0.5) {
                continue;
            }
            edges.push((i, j, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()));
        }
    }
    AttributedGraph::from_edge_list(&vertices, &edges, undirected).unwrap()
}

fn seeded(seed: u64, order: usize, dim: usize) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let undirected = rng.random_bool(0.5);
    random_graph(&mut rng, order, dim, undirected)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Edit-path cost of a partial vertex matching between unpadded graphs:
/// substitutions for matched vertices and edges, deletions and insertions
/// for the rest.
fn partial_matching_cost(x: &AttributedGraph, y: &AttributedGraph, map: &[Option<usize>]) -> f64 {
    let (m, n) = (x.order(), y.order());
    let zero = vec![0.0; x.dim()];
    let mut inverse = vec![None; n];
    for (i, t) in map.iter().enumerate() {
        if let Some(t) = t {
            inverse[*t] = Some(i);
        }
    }
    let mut cost = 0.0;
    for i in 0..m {
        for j in 0..m {
            let target = match (map[i], map[j]) {
                (Some(a), Some(b)) => y.cell(a, b),
                _ => &zero[..],
            };
            cost += diff_norm(x.cell(i, j), target);
        }
    }
    for k in 0..n {
        for l in 0..n {
            if inverse[k].is_none() || inverse[l].is_none() {
                cost += norm(y.cell(k, l));
            }
        }
    }
    cost
}

fn min_over_partial_matchings(x: &AttributedGraph, y: &AttributedGraph) -> f64 {
    fn go(x: &AttributedGraph, y: &AttributedGraph, map: &mut Vec<Option<usize>>, used: &mut [bool], best: &mut f64) {
        if map.len() == x.order() {
            *best = best.min(partial_matching_cost(x, y, map));
            return;
        }
        map.push(None);
        go(x, y, map, used, best);
        map.pop();
        for t in 0..y.order() {
            if !used[t] {
                used[t] = true;
                map.push(Some(t));
                go(x, y, map, used, best);
                map.pop();
                used[t] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(x, y, &mut Vec::new(), &mut vec![false; y.order()], &mut best);
    best
}

#[test]
fn ged_with_common_padding_matches_partial_matching_oracle() {
    let cfg = SolverConfig::exact();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..60 {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let undirected = rng.random_bool(0.5);
        let x = random_graph(&mut rng, m, 2, undirected);
        let y = random_graph(&mut rng, n, 2, undirected);
        let oracle = min_over_partial_matchings(&x, &y);
        let common = m.max(n);
        let g = alignment::ged(&x.pad_to_order(common).unwrap(), &y.pad_to_order(common).unwrap(), &cfg).unwrap();
        assert!((g - oracle).abs() < 1e-9, "{m}x{n}: ged {g} vs oracle {oracle}");
        // extra padding does not change the minimum
        let wide = alignment::ged(&x.pad_to_order(m + n).unwrap(), &y.pad_to_order(m + n).unwrap(), &cfg).unwrap();
        assert!((wide - oracle).abs() < 1e-9);
    }
}

#[test]
fn edit_cost_of_a_deletion_is_the_attribute_norm() {
    let a = AttributedGraph::from_edge_list(&[vec![3.0, 4.0]], &[], true).unwrap();
    let zero = AttributedGraph::zeros(1, 2);
    assert_eq!(alignment::edit_cost(&a, &zero, &Permutation::identity(1)).unwrap(), 5.0);
    assert_eq!(alignment::edit_cost(&a, &a, &Permutation::identity(1)).unwrap(), 0.0);
}

#[test]
fn triangle_versus_path_kernel() {
    let one = || vec![1.0];
    let tri = AttributedGraph::from_edge_list(
        &[vec![0.0], vec![0.0], vec![0.0]],
        &[(0, 1, one()), (1, 2, one()), (0, 2, one())],
        true,
    )
    .unwrap();
    let path = AttributedGraph::from_edge_list(&[vec![0.0], vec![0.0], vec![0.0]], &[(0, 1, one()), (1, 2, one())], true)
        .unwrap();
    assert_eq!(alignment::kernel(&tri, &path, &SolverConfig::exact()).unwrap().kernel_value, 4.0);
}

fn same_orbit_brute(x: &AttributedGraph, y: &AttributedGraph) -> bool {
    let mut p = Permutation::identity(x.order());
    loop {
        if x.apply_permutation(&p).unwrap() == *y {
            return true;
        }
        if !p.advance() {
            return false;
        }
    }
}

#[test]
fn zero_distance_iff_same_orbit() {
    let cfg = SolverConfig::exact();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let n = rng.random_range(1..=5);
        let x = random_graph(&mut rng, n, 1, true);
        let y = if trial % 2 == 0 {
            x.apply_permutation(&Permutation::random(n, &mut rng)).unwrap()
        } else {
            let mut y = x.apply_permutation(&Permutation::random(n, &mut rng)).unwrap();
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            // copying one vertex attribute over another
            y.cell_mut(i, i)[0] = y.cell(j, j)[0];
            y
        };
        let d = alignment::distance(&x, &y, &cfg).unwrap();
        assert_eq!(d == 0.0, same_orbit_brute(&x, &y), "trial {trial}: d = {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_json_roundtrip_is_bit_exact(
        order in 1usize..6,
        dim in 1usize..4,
        undirected in any::<bool>(),
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 64..65),
        density in 0.0f64..1.0,
    ) {
        let mut k = 0;
        // a negative zero is the null attribute and is not listed as an edge
        let mut next = || { k += 1; let v = values[k % values.len()]; if v == 0.0 { 0.0 } else { v } };
        let vertices: Vec<Vec<f64>> = (0..order).map(|_| (0..dim).map(|_| next()).collect()).collect();
        let mut edges = Vec::new();
        for i in 0..order {
            for j in 0..order {
                if i == j || (undirected && j < i) || (i * order + j) as f64 / (order * order) as f64 >= density {
                    continue;
                }
                edges.push((i, j, (0..dim).map(|_| next()).collect::<Vec<f64>>()));
            }
        }
        let g = AttributedGraph::from_edge_list(&vertices, &edges, undirected).unwrap();
        let text = io::to_json_string(&g, "g").unwrap();
        let back: AttributedGraph = io::from_json_str(&text, "g").unwrap();
        let bits = |g: &AttributedGraph| g.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&g));
        prop_assert_eq!(back.is_undirected(), g.is_undirected() && g.is_symmetric());

        let ds = io::dataset_to_json(&[g.clone(), back.clone()], Some(&[1.0, -1.0])).unwrap();
        let parsed = io::dataset_from_json(&ds, "d").unwrap();
        prop_assert_eq!(bits(&parsed.graphs[0]), bits(&g));
    }

    #[test]
    fn cauchy_schwarz_both_solvers(seed in any::<u64>(), n in 1usize..7) {
        let x = seeded(seed, n, 2);
        let y = seeded(seed ^ 1, n, 2);
        for cfg in [SolverConfig::exact(), SolverConfig::heuristic(4, seed)] {
            let k = alignment::kernel(&x, &y, &cfg).unwrap().kernel_value;
            prop_assert!(k.abs() <= x.length() * y.length() + 1e-9);
        }
    }

    #[test]
    fn orbit_invariance(seed in any::<u64>(), n in 1usize..6) {
        let cfg = SolverConfig::exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = seeded(seed, n, 2);
        let y = seeded(seed ^ 2, n, 2);
        let px = x.apply_permutation(&Permutation::random(n, &mut rng)).unwrap();
        let py = y.apply_permutation(&Permutation::random(n, &mut rng)).unwrap();
        let k = alignment::kernel(&x, &y, &cfg).unwrap().kernel_value;
        prop_assert!((alignment::kernel(&px, &py, &cfg).unwrap().kernel_value - k).abs() < 1e-9);
        let d = alignment::distance(&x, &y, &cfg).unwrap();
        prop_assert!((alignment::distance(&px, &py, &cfg).unwrap() - d).abs() < 1e-9);
        let g = alignment::ged(&x, &y, &cfg).unwrap();
        prop_assert!((alignment::ged(&px, &py, &cfg).unwrap() - g).abs() < 1e-9);
    }

    #[test]
    fn witness_reproduces_kernel_value(seed in any::<u64>(), n in 1usize..7) {
        let x = seeded(seed, n, 2);
        let y = seeded(seed ^ 3, n, 2);
        for cfg in [SolverConfig::exact(), SolverConfig::heuristic(3, seed)] {
            let r = alignment::kernel(&x, &y, &cfg).unwrap();
            let direct = x.apply_permutation(&r.witness).unwrap().frobenius_inner(&y).unwrap();
            prop_assert!((direct - r.kernel_value).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_is_neutral(seed in any::<u64>(), n in 1usize..5, extra in 0usize..3) {
        let cfg = SolverConfig::exact();
        let x = seeded(seed, n, 2);
        let y = seeded(seed ^ 4, n, 2);
        let (px, py) = (x.pad_to_order(n + extra).unwrap(), y.pad_to_order(n + extra).unwrap());
        prop_assert!((px.length() - x.length()).abs() < 1e-12);
        // padding vertices are extra alignment targets, so signed data can only gain
        let k = alignment::kernel(&x, &y, &cfg).unwrap().kernel_value;
        prop_assert!(alignment::kernel(&px, &py, &cfg).unwrap().kernel_value >= k - 1e-9);

        let abs = |g: &AttributedGraph| {
            AttributedGraph::from_cells(g.order(), 2, g.as_slice().iter().map(|c| c.abs()).collect()).unwrap()
        };
        let (ax, ay) = (abs(&x), abs(&y));
        let k = alignment::kernel(&ax, &ay, &cfg).unwrap().kernel_value;
        let (pax, pay) = (ax.pad_to_order(n + extra).unwrap(), ay.pad_to_order(n + extra).unwrap());
        prop_assert!((alignment::kernel(&pax, &pay, &cfg).unwrap().kernel_value - k).abs() < 1e-9);
    }

    #[test]
    fn permutations_are_isometries(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = seeded(seed, n, 3);
        let y = seeded(seed ^ 5, n, 3);
        let p = Permutation::random(n, &mut rng);
        let (px, py) = (x.apply_permutation(&p).unwrap(), y.apply_permutation(&p).unwrap());
        prop_assert!((px.frobenius_inner(&py).unwrap() - x.frobenius_inner(&y).unwrap()).abs() < 1e-12);
        prop_assert!((px.length() - x.length()).abs() < 1e-12);
        prop_assert_eq!(px.apply_permutation(&p.inverse()).unwrap(), x);
    }

    #[test]
    fn heuristic_finds_self_alignment(seed in any::<u64>(), n in 1usize..9) {
        let x = seeded(seed, n, 2);
        let r = alignment::kernel(&x, &x, &SolverConfig::heuristic(8, seed)).unwrap();
        prop_assert!((r.kernel_value - x.norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn predictions_and_assignments_ignore_relabeling(seed in any::<u64>()) {
        let cfg = SolverConfig::exact();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = seeded(seed, 4, 2);
        let px = x.apply_permutation(&Permutation::random(4, &mut rng)).unwrap();
        let model = AdalineModel { weight: seeded(seed ^ 6, 4, 2), bias: rng.random_range(-1.0..1.0) };
        prop_assert_eq!(
            learners::adaline_predict(&model, &x, &cfg).unwrap(),
            learners::adaline_predict(&model, &px, &cfg).unwrap()
        );
        let codebook = Codebook::new((0..3).map(|c| seeded(seed ^ (10 + c), 4, 2)).collect()).unwrap();
        prop_assert_eq!(
            learners::assign(&[x], &codebook, &cfg).unwrap(),
            learners::assign(&[px], &codebook, &cfg).unwrap()
        );
    }
}
