//! k-medoids (PAM) clustering of daily profiles into representative days.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::network::NetworkModel;
use crate::model::series::{to_representative, RepresentativeDay, YearSeries, DAYS_PER_YEAR};

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Indices into the input, sorted ascending.
    pub medoids: Vec<usize>,
    /// Position in `medoids` for every input item.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.medoids.len()];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Partitioning Around Medoids: greedy BUILD, then first-improvement swaps
/// visited in a seed-dependent order until no swap lowers the total distance.
pub fn k_medoids(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| euclidean(a, b)).collect())
        .collect();

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    while medoids.len() < k {
        let mut best = (f64::INFINITY, usize::MAX);
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let cost: f64 = (0..n).map(|i| nearest[i].min(d[i][c])).sum();
            if cost < best.0 - 1e-12 {
                best = (cost, c);
            }
        }
        medoids.push(best.1);
        for i in 0..n {
            nearest[i] = nearest[i].min(d[i][best.1]);
        }
    }

    // Nearest and second-nearest medoid distances make each swap O(n).
    let caches = |meds: &[usize]| -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        let mut near = vec![0; n];
        let mut first = vec![f64::INFINITY; n];
        let mut second = vec![f64::INFINITY; n];
        for i in 0..n {
            for (j, &m) in meds.iter().enumerate() {
                let v = d[i][m];
                if v < first[i] {
                    second[i] = first[i];
                    first[i] = v;
                    near[i] = j;
                } else if v < second[i] {
                    second[i] = v;
                }
            }
        }
        (near, first, second)
    };
    let (mut near, mut first, mut second) = caches(&medoids);
    let mut cost: f64 = first.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut improved = false;
        let mut order: Vec<(usize, usize)> = (0..k)
            .flat_map(|mi| (0..n).map(move |o| (mi, o)))
            .collect();
        order.shuffle(&mut rng);
        for (mi, o) in order {
            if medoids.contains(&o) {
                continue;
            }
            let c: f64 = (0..n)
                .map(|i| {
                    let kept = if near[i] == mi { second[i] } else { first[i] };
                    kept.min(d[i][o])
                })
                .sum();
            if c < cost - 1e-9 {
                medoids[mi] = o;
                (near, first, second) = caches(&medoids);
                cost = first.iter().sum();
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    medoids.sort_unstable();
    let assignment = (0..n)
        .map(|i| {
            let mut best = 0;
            for (j, &m) in medoids.iter().enumerate() {
                if d[i][m] < d[i][medoids[best]] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(Clustering {
        medoids,
        assignment,
        cost,
    })
}

/// Per-day feature vectors: every bus demand series and every RG series,
/// each scaled by its maximum over the year.
pub fn day_features(series: &YearSeries) -> Vec<Vec<f64>> {
    let n_bus = series.bus_ids.len();
    let hours = series.days.first().map_or(0, |d| d.demand_kw.len());
    let mut max_d = vec![0.0f64; n_bus];
    let mut max_r = vec![0.0f64; n_bus];
    for day in &series.days {
        for h in 0..hours {
            for b in 0..n_bus {
                max_d[b] = max_d[b].max(day.demand_kw[h][b]);
                max_r[b] = max_r[b].max(day.rg_pu[h][b]);
            }
        }
    }
    let scale = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };
    series
        .days
        .iter()
        .map(|day| {
            let mut f = Vec::with_capacity(2 * n_bus * hours);
            for b in 0..n_bus {
                f.extend((0..hours).map(|h| scale(day.demand_kw[h][b], max_d[b])));
            }
            for b in 0..n_bus {
                f.extend((0..hours).map(|h| scale(day.rg_pu[h][b], max_r[b])));
            }
            f
        })
        .collect()
}

/// Reduces a full year of daily profiles to `k` medoid days weighted by cluster size.
pub fn cluster_representative_days(
    series: &YearSeries,
    k: usize,
    seed: u64,
    net: &NetworkModel,
    default_pf: f64,
) -> Result<Vec<RepresentativeDay>> {
    if series.days.len() != DAYS_PER_YEAR {
        return Err(Error::Validation(vec![format!(
            "clustering needs {DAYS_PER_YEAR} complete days, found {}",
            series.days.len()
        )]));
    }
    if k == 0 || k > DAYS_PER_YEAR {
        return Err(Error::InvalidArgument(format!("cluster count {k} outside 1..=365")));
    }
    let clustering = k_medoids(&day_features(series), k, seed)?;
    let sizes = clustering.sizes();
    Ok(clustering
        .medoids
        .iter()
        .zip(sizes)
        .map(|(&m, size)| to_representative(&series.days[m], size as f64, net, default_pf))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::series::DayProfile;

    fn year_of(shapes: &[(Vec<f64>, usize)]) -> YearSeries {
        let mut days = Vec::new();
        for (shape, count) in shapes {
            for _ in 0..*count {
                days.push(DayProfile {
                    day: days.len(),
                    weight: None,
                    demand_kw: shape.iter().map(|&v| vec![0.0, v]).collect(),
                    rg_pu: vec![vec![0.0, 0.0]; 24],
                });
            }
        }
        YearSeries {
            bus_ids: vec!["p".into(), "a".into()],
            days,
        }
    }

    fn shape(base: f64, slope: f64) -> Vec<f64> {
        (0..24).map(|h| base + slope * h as f64).collect()
    }

    fn total_cost(points: &[Vec<f64>], meds: &[usize]) -> f64 {
        points
            .iter()
            .map(|p| meds.iter().map(|&m| euclidean(p, &points[m])).fold(f64::INFINITY, f64::min))
            .sum()
    }

    #[test]
    fn identical_days_single_cluster() {
        let ys = year_of(&[(shape(10.0, 1.0), 365)]);
        let c = k_medoids(&day_features(&ys), 1, 7).unwrap();
        assert_eq!(c.sizes(), vec![365]);
    }

    #[test]
    fn four_shapes_recovered_and_match_brute_force() {
        let shapes = [
            (shape(10.0, 0.0), 100),
            (shape(30.0, 1.0), 100),
            (shape(5.0, 3.0), 100),
            (shape(50.0, -1.5), 65),
        ];
        let ys = year_of(&shapes);
        let f = day_features(&ys);
        let c = k_medoids(&f, 4, 1).unwrap();
        let mut sizes = c.sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![65, 100, 100, 100]);

        // Brute force over medoid subsets drawn from one representative of each distinct day.
        let mut distinct: Vec<usize> = Vec::new();
        for i in 0..f.len() {
            if !distinct.iter().any(|&j| f[j] == f[i]) {
                distinct.push(i);
            }
        }
        assert_eq!(distinct.len(), 4);
        let best = total_cost(&f, &distinct);
        assert!((c.cost - best).abs() < 1e-9);
        assert!(best.abs() < 1e-12);
    }

    #[test]
    fn pam_reaches_brute_force_optimum_on_small_instance() {
        // Six distinct shapes with uneven multiplicity, k = 3: enumerate all 20 subsets.
        let shapes: Vec<(Vec<f64>, usize)> = vec![
            (shape(10.0, 0.0), 5),
            (shape(12.0, 0.1), 3),
            (shape(30.0, 1.0), 4),
            (shape(33.0, 0.8), 6),
            (shape(60.0, -1.0), 2),
            (shape(5.0, 2.0), 7),
        ];
        let ys = year_of(&shapes);
        let f = day_features(&ys);
        let reps: Vec<usize> = {
            let mut r = Vec::new();
            let mut i = 0;
            for (_, c) in &shapes {
                r.push(i);
                i += c;
            }
            r
        };
        let mut best = f64::INFINITY;
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    best = best.min(total_cost(&f, &[reps[a], reps[b], reps[c]]));
                }
            }
        }
        for seed in 0..5 {
            let c = k_medoids(&f, 3, seed).unwrap();
            assert!((c.cost - best).abs() < 1e-9, "seed {seed}: {} vs {best}", c.cost);
        }
    }

    #[test]
    fn saturation_gives_unit_weights() {
        let ys = year_of(&[(shape(10.0, 0.0), 365)]);
        let mut points = day_features(&ys);
        for (i, p) in points.iter_mut().enumerate() {
            p[0] += i as f64;
        }
        let c = k_medoids(&points, 365, 3).unwrap();
        assert!(c.sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn out_of_range_k() {
        let ys = year_of(&[(shape(10.0, 0.0), 3)]);
        assert!(k_medoids(&day_features(&ys), 0, 0).is_err());
        assert!(k_medoids(&day_features(&ys), 4, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let ys = year_of(&[(shape(10.0, 0.0), 30), (shape(20.0, 0.5), 20), (shape(40.0, -0.5), 15)]);
        let mut f = day_features(&ys);
        for (i, p) in f.iter_mut().enumerate() {
            p[3] += ((i * 37) % 11) as f64 * 0.01;
        }
        assert_eq!(k_medoids(&f, 3, 42).unwrap(), k_medoids(&f, 3, 42).unwrap());
    }
}
