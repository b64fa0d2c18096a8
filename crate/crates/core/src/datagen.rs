//! Reproducible synthetic distributions over graph orbits.
//!
//! All sampling uses ChaCha8 seeded from the spec, so a spec file fully
//! determines its dataset on every platform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::alignment::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::{AttributeVector, AttributedGraph, Permutation};
use crate::learners::AdalineModel;

/// Noise model around a seed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub seed_graph: AttributedGraph,
    /// Gaussian noise added to every component of every nonzero cell.
    #[serde(default)]
    pub attr_noise_sigma: f64,
    /// Probability of toggling each off-diagonal pair (each unordered pair
    /// for undirected seeds).
    #[serde(default)]
    pub edge_flip_prob: f64,
    /// Attribute given to edges created by a flip.
    pub flip_attr: AttributeVector,
    #[serde(default)]
    pub permute: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

impl PerturbationSpec {
    /// No noise and no permutation.
    pub fn degenerate(seed_graph: AttributedGraph) -> Self {
        let flip_attr = vec![0.0; seed_graph.dim()];
        PerturbationSpec {
            seed_graph,
            attr_noise_sigma: 0.0,
            edge_flip_prob: 0.0,
            flip_attr,
            permute: false,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attr_noise_sigma.is_finite() && self.attr_noise_sigma >= 0.0) {
            return Err(Error::config("attr_noise_sigma", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.edge_flip_prob) {
            return Err(Error::config("edge_flip_prob", "must lie in [0, 1)"));
        }
        if self.flip_attr.len() != self.seed_graph.dim() {
            return Err(Error::config(
                "flip_attr",
                format!("length {} but attr_dim is {}", self.flip_attr.len(), self.seed_graph.dim()),
            ));
        }
        Ok(())
    }

    /// Expected `d(sample, seed)²` from attribute noise alone, assuming the
    /// identity alignment stays optimal.
    pub fn expected_noise_sq(&self) -> f64 {
        let g = &self.seed_graph;
        let nonzero_cells = g.as_slice().chunks(g.dim().max(1)).filter(|c| c.iter().any(|&v| v != 0.0)).count();
        self.attr_noise_sigma.powi(2) * (nonzero_cells * g.dim()) as f64
    }

    fn perturb(&self, rng: &mut ChaCha8Rng) -> AttributedGraph {
        let seed = &self.seed_graph;
        let (n, dim) = (seed.order(), seed.dim());
        let undirected = seed.is_undirected();
        let mut g = seed.clone();
        if self.attr_noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.attr_noise_sigma).expect("validated sigma");
            for i in 0..n {
                for j in 0..n {
                    if undirected && j < i {
                        continue;
                    }
                    if seed.cell(i, j).iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for c in 0..dim {
                        let e = normal.sample(rng);
                        g.cell_mut(i, j)[c] += e;
                        if undirected && i != j {
                            g.cell_mut(j, i)[c] += e;
                        }
                    }
                }
            }
        }
        if self.edge_flip_prob > 0.0 {
            for i in 0..n {
                for j in 0..n {
                    if i == j || (undirected && j < i) || !rng.random_bool(self.edge_flip_prob) {
                        continue;
                    }
                    let present = seed.cell(i, j).iter().any(|&v| v != 0.0);
                    let new: AttributeVector = if present { vec![0.0; dim] } else { self.flip_attr.clone() };
                    g.cell_mut(i, j).copy_from_slice(&new);
                    if undirected {
                        g.cell_mut(j, i).copy_from_slice(&new);
                    }
                }
            }
        }
        if self.permute {
            let p = Permutation::random(n, rng);
            g = g.apply_permutation(&p).expect("order matches");
        }
        g
    }
}

/// `count` independent draws from `spec`.
pub fn sample(spec: &PerturbationSpec, count: usize) -> Result<Vec<AttributedGraph>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    Ok((0..count).map(|_| spec.perturb(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub spec: PerturbationSpec,
    pub weight: f64,
}

/// Finite mixture of perturbation models. Sampling draws from a single
/// stream seeded by `rng_seed`; the per-component `rng_seed` fields are not
/// used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::config("components", "mixture is empty"))?;
        let mut total = 0.0;
        for (c, comp) in self.components.iter().enumerate() {
            comp.spec.validate()?;
            if !(comp.weight.is_finite() && comp.weight >= 0.0) {
                return Err(Error::config(format!("components[{c}].weight"), "must be finite and >= 0"));
            }
            first.spec.seed_graph.check_same_shape(&comp.spec.seed_graph)?;
            total += comp.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config("components", format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// `count` draws with the index of the component each came from.
pub fn sample_mixture(spec: &MixtureSpec, count: usize) -> Result<Vec<(AttributedGraph, usize)>> {
    spec.validate()?;
    let weights = WeightedIndex::new(spec.components.iter().map(|c| c.weight))
        .map_err(|e| Error::config("components", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    Ok((0..count)
        .map(|_| {
            let c = weights.sample(&mut rng);
            (spec.components[c].spec.perturb(&mut rng), c)
        })
        .collect())
}

/// Equal-weight two-component mixture labeled `+1` (first spec) and `-1`.
pub fn two_class_adaline_task(
    positive: &PerturbationSpec,
    negative: &PerturbationSpec,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<(AttributedGraph, f64)>> {
    let mixture = MixtureSpec {
        components: vec![
            MixtureComponent {
                spec: positive.clone(),
                weight: 0.5,
            },
            MixtureComponent {
                spec: negative.clone(),
                weight: 0.5,
            },
        ],
        rng_seed,
    };
    Ok(sample_mixture(&mixture, count)?
        .into_iter()
        .map(|(g, c)| (g, if c == 0 { 1.0 } else { -1.0 }))
        .collect())
}

/// Signed margins `y · (k(x, W) + b)` of a model on labeled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    pub min_margin: f64,
    pub mean_margin: f64,
    pub misclassified: usize,
    pub count: usize,
}

pub fn margin_report(model: &AdalineModel, data: &[(AttributedGraph, f64)], cfg: &SolverConfig) -> Result<MarginReport> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut min_margin = f64::INFINITY;
    let mut sum = 0.0;
    let mut misclassified = 0;
    for (x, y) in data {
        let m = y * model.score(x, cfg)?;
        min_margin = min_margin.min(m);
        sum += m;
        if m <= 0.0 && !(m == 0.0 && *y > 0.0) {
            misclassified += 1;
        }
    }
    Ok(MarginReport {
        min_margin,
        mean_margin: sum / data.len() as f64,
        misclassified,
        count: data.len(),
    })
}

fn random_seed_graph(rng: &mut ChaCha8Rng, order: usize, density: f64, vertex_scale: f64, edge_scale: f64) -> AttributedGraph {
    let vertices: Vec<AttributeVector> = (0..order)
        .map(|_| (0..2).map(|_| vertex_scale * rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut edges = Vec::new();
    for i in 0..order {
        for j in i + 1..order {
            if rng.random_bool(density) {
                edges.push((i, j, (0..2).map(|_| edge_scale * rng.random_range(0.5..1.5)).collect()));
            }
        }
    }
    AttributedGraph::from_edge_list(&vertices, &edges, true).expect("well-formed preset")
}

/// Order-8 seed graph with 2-dimensional attributes perturbed by Gaussian
/// noise (sigma 0.1), edge flips (0.05) and a random relabeling.
pub fn perturbed_orbit_preset(rng_seed: u64) -> PerturbationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    PerturbationSpec {
        seed_graph: random_seed_graph(&mut rng, 8, 0.4, 1.0, 1.0),
        attr_noise_sigma: 0.1,
        edge_flip_prob: 0.05,
        flip_attr: vec![1.0, 1.0],
        permute: true,
        rng_seed,
    }
}

/// Three order-6 seed graphs with vertex attributes around three distinct
/// centres, Gaussian noise 0.1, no edge flips, random relabeling, equal
/// weights.
pub fn three_cluster_preset(rng_seed: u64) -> MixtureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1u64);
    let centres = [[2.0, 0.0], [-1.0, 1.8], [-1.0, -1.8]];
    let components = centres
        .iter()
        .map(|centre| {
            let mut g = random_seed_graph(&mut rng, 6, 0.5, 0.3, 0.5);
            for i in 0..6 {
                for (c, v) in g.cell_mut(i, i).iter_mut().zip(centre) {
                    *c += v;
                }
            }
            MixtureComponent {
                spec: PerturbationSpec {
                    seed_graph: g,
                    attr_noise_sigma: 0.1,
                    edge_flip_prob: 0.0,
                    flip_attr: vec![0.5, 0.5],
                    permute: true,
                    rng_seed: 0,
                },
                weight: 1.0 / 3.0,
            }
        })
        .collect::<Vec<_>>();
    let mut spec = MixtureSpec { components, rng_seed };
    // exact 1/3 weights do not sum to one in floating point
    let rest: f64 = spec.components[..2].iter().map(|c| c.weight).sum();
    spec.components[2].weight = 1.0 - rest;
    spec
}

/// Two classes of order-5 graphs sharing one edge pattern: vertex
/// attributes `(1, 0)` for the positive class and `(0, 1)` for the negative
/// class, with noise 0.1, edge flips 0.05 and random relabeling.
pub fn two_class_preset() -> (PerturbationSpec, PerturbationSpec) {
    let edges: Vec<(usize, usize, AttributeVector)> = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]
        .iter()
        .map(|&(i, j)| (i, j, vec![0.5, 0.5]))
        .collect();
    let class = |attr: [f64; 2]| PerturbationSpec {
        seed_graph: AttributedGraph::from_edge_list(&vec![attr.to_vec(); 5], &edges, true).expect("well-formed preset"),
        attr_noise_sigma: 0.1,
        edge_flip_prob: 0.05,
        flip_attr: vec![0.5, 0.5],
        permute: true,
        rng_seed: 0,
    };
    (class([1.0, 0.0]), class([0.0, 1.0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment;

    fn small_seed() -> AttributedGraph {
        AttributedGraph::from_edge_list(
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.5], vec![-1.0, 0.3]],
            &[(0, 1, vec![1.0, 1.0]), (1, 2, vec![0.7, -0.2]), (2, 3, vec![0.4, 0.9])],
            true,
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_copies_seed() {
        let spec = PerturbationSpec::degenerate(small_seed());
        assert!(sample(&spec, 5).unwrap().iter().all(|g| *g == spec.seed_graph));
    }

    #[test]
    fn permute_only_stays_in_orbit() {
        let spec = PerturbationSpec {
            permute: true,
            rng_seed: 3,
            ..PerturbationSpec::degenerate(small_seed())
        };
        let cfg = SolverConfig::exact();
        let gs = sample(&spec, 20).unwrap();
        assert!(gs.iter().any(|g| *g != spec.seed_graph));
        for g in &gs {
            assert_eq!(alignment::distance(g, &spec.seed_graph, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = perturbed_orbit_preset(11);
        assert_eq!(sample(&spec, 10).unwrap(), sample(&spec, 10).unwrap());
        let other = PerturbationSpec { rng_seed: 12, ..spec.clone() };
        assert_ne!(sample(&spec, 10).unwrap(), sample(&other, 10).unwrap());
    }

    #[test]
    fn noise_energy_matches_chi_square_mean() {
        let spec = PerturbationSpec {
            attr_noise_sigma: 0.1,
            rng_seed: 5,
            ..PerturbationSpec::degenerate(small_seed())
        };
        let cfg = SolverConfig::exact();
        let gs = sample(&spec, 1000).unwrap();
        let mean: f64 = gs
            .iter()
            .map(|g| alignment::distance(g, &spec.seed_graph, &cfg).unwrap().powi(2))
            .sum::<f64>()
            / 1000.0;
        let expected = spec.expected_noise_sq();
        assert!((expected - 0.1f64.powi(2) * 20.0).abs() < 1e-15);
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn flips_keep_symmetry_and_use_flip_attr() {
        let spec = PerturbationSpec {
            edge_flip_prob: 0.5,
            flip_attr: vec![9.0, 9.0],
            rng_seed: 1,
            ..PerturbationSpec::degenerate(small_seed())
        };
        for g in sample(&spec, 20).unwrap() {
            assert!(g.is_symmetric());
            for i in 0..4 {
                for j in 0..4 {
                    let c = g.cell(i, j);
                    let s = spec.seed_graph.cell(i, j);
                    assert!(c == s || c == [0.0, 0.0] || c == [9.0, 9.0]);
                }
            }
        }
    }

    #[test]
    fn mixture_labels_and_frequencies() {
        let single = MixtureSpec {
            components: vec![MixtureComponent {
                spec: PerturbationSpec::degenerate(small_seed()),
                weight: 1.0,
            }],
            rng_seed: 0,
        };
        assert!(sample_mixture(&single, 10).unwrap().iter().all(|(_, c)| *c == 0));

        let mut two = single.clone();
        two.components.push(MixtureComponent {
            spec: PerturbationSpec::degenerate(small_seed()),
            weight: 0.0,
        });
        assert!(sample_mixture(&two, 200).unwrap().iter().all(|(_, c)| *c == 0));

        let spec = three_cluster_preset(9);
        let draws = sample_mixture(&spec, 1000).unwrap();
        for (c, comp) in spec.components.iter().enumerate() {
            let hits = draws.iter().filter(|(_, l)| *l == c).count() as f64;
            let p = comp.weight;
            let sd = (1000.0 * p * (1.0 - p)).sqrt();
            assert!((hits - 1000.0 * p).abs() <= 3.0 * sd, "component {c}: {hits}");
        }

        let empty = MixtureSpec {
            components: vec![],
            rng_seed: 0,
        };
        assert!(sample_mixture(&empty, 1).is_err());
        let mut unnormalized = single;
        unnormalized.components[0].weight = 0.9;
        assert!(sample_mixture(&unnormalized, 1).is_err());
    }

    #[test]
    fn two_class_task_frequencies_and_degeneracy() {
        let (pos, neg) = two_class_preset();
        let data = two_class_adaline_task(&pos, &neg, 1000, 4).unwrap();
        let positives = data.iter().filter(|(_, y)| *y == 1.0).count() as f64;
        assert!((positives - 500.0).abs() <= 3.0 * 250f64.sqrt());
        assert_eq!(data, two_class_adaline_task(&pos, &neg, 1000, 4).unwrap());

        let pos0 = PerturbationSpec::degenerate(pos.seed_graph.clone());
        let neg0 = PerturbationSpec::degenerate(neg.seed_graph.clone());
        for (g, y) in two_class_adaline_task(&pos0, &neg0, 50, 1).unwrap() {
            let seed = if y > 0.0 { &pos0.seed_graph } else { &neg0.seed_graph };
            assert_eq!(g, *seed);
        }
    }

    #[test]
    fn three_cluster_seeds_are_well_separated() {
        let spec = three_cluster_preset(0);
        let cfg = SolverConfig::exact();
        let scale = spec.components[0].spec.expected_noise_sq().sqrt();
        for a in 0..3 {
            for b in a + 1..3 {
                let d = alignment::distance(&spec.components[a].spec.seed_graph, &spec.components[b].spec.seed_graph, &cfg)
                    .unwrap();
                assert!(d >= 10.0 * scale, "{a},{b}: {d} vs {scale}");
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let base = PerturbationSpec::degenerate(small_seed());
        for bad in [
            PerturbationSpec { attr_noise_sigma: -1.0, ..base.clone() },
            PerturbationSpec { edge_flip_prob: 1.0, ..base.clone() },
            PerturbationSpec { flip_attr: vec![1.0], ..base.clone() },
        ] {
            assert!(sample(&bad, 1).is_err());
        }
    }
}
