//! Real-coded variation operators on the unit hypercube.

use rand::Rng;

use super::bounds::Genotype;

/// Simulated binary crossover. Every component gets its own spread factor;
/// children are clipped to `[0, 1]`.
pub fn sbx_crossover<R: Rng>(p1: &[f64], p2: &[f64], eta_c: f64, rng: &mut R) -> (Genotype, Genotype) {
    debug_assert_eq!(p1.len(), p2.len());
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for (&a, &b) in p1.iter().zip(p2) {
        if (a - b).abs() < 1e-14 {
            c1.push(a);
            c2.push(b);
            continue;
        }
        let u: f64 = rng.gen();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta_c + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta_c + 1.0))
        };
        let mut x = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
        let mut y = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
        if rng.gen::<bool>() {
            std::mem::swap(&mut x, &mut y);
        }
        c1.push(x.clamp(0.0, 1.0));
        c2.push(y.clamp(0.0, 1.0));
    }
    (c1, c2)
}

/// Bounded polynomial mutation on `[0, 1]`; each component is perturbed
/// independently with probability `rate`.
pub fn polynomial_mutation<R: Rng>(x: &[f64], eta_m: f64, rate: f64, rng: &mut R) -> Genotype {
    let mut_pow = 1.0 / (eta_m + 1.0);
    x.iter()
        .map(|&v| {
            if rng.gen::<f64>() >= rate {
                return v;
            }
            let (d1, d2) = (v, 1.0 - v);
            let u: f64 = rng.gen();
            let dq = if u < 0.5 {
                let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta_m + 1.0);
                val.powf(mut_pow) - 1.0
            } else {
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta_m + 1.0);
                1.0 - val.powf(mut_pow)
            };
            (v + dq).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Whether `x` lies at distance `>= d_th` from every member of `kept`.
pub fn is_distinct(x: &[f64], kept: &[Genotype], d_th: f64) -> bool {
    kept.iter().all(|k| distance(x, k) >= d_th)
}

/// Greedy first-seen filter: drops every genotype closer than `d_th` to one
/// already kept.
pub fn remove_duplicates(pop: &[Genotype], d_th: f64) -> Vec<Genotype> {
    let mut kept: Vec<Genotype> = Vec::with_capacity(pop.len());
    for x in pop {
        if is_distinct(x, &kept, d_th) {
            kept.push(x.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_parents_reproduce() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = vec![0.1, 0.5, 0.93, 0.0, 1.0];
        for _ in 0..100 {
            let (a, b) = sbx_crossover(&p, &p, 15.0, &mut rng);
            assert_eq!(a, p);
            assert_eq!(b, p);
        }
    }

    #[test]
    fn sbx_preserves_parent_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p1 = [0.2, 0.45, 0.6];
        let p2 = [0.7, 0.55, 0.3];
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let (a, b) = sbx_crossover(&p1, &p2, 15.0, &mut rng);
            for i in 0..3 {
                sums[i] += a[i] + b[i];
            }
        }
        for i in 0..3 {
            let mean = sums[i] / (2 * n) as f64;
            assert!((mean - 0.5 * (p1[i] + p2[i])).abs() < 0.01);
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = vec![0.0, 0.3, 1.0];
        assert_eq!(polynomial_mutation(&x, 20.0, 0.0, &mut rng), x);
    }

    #[test]
    fn mutation_at_the_boundary_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let y = polynomial_mutation(&[0.0, 1.0], 20.0, 1.0, &mut rng);
            assert!(y[0] >= 0.0 && y[1] <= 1.0);
        }
    }

    #[test]
    fn mutation_is_symmetric_at_the_centre() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let (mut up, mut sum) = (0usize, 0.0);
        for _ in 0..n {
            let d = polynomial_mutation(&[0.5], 20.0, 1.0, &mut rng)[0] - 0.5;
            up += usize::from(d > 0.0);
            sum += d;
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((up as f64 - n as f64 / 2.0).abs() < 4.0 * sigma);
        assert!((sum / n as f64).abs() < 1e-3);
    }

    #[test]
    fn duplicate_boundary_is_strict() {
        let a = vec![0.0; 11];
        let mut b = a.clone();
        b[0] = 0.05;
        assert_eq!(remove_duplicates(&[a.clone(), a.clone()], 0.05).len(), 1);
        assert_eq!(remove_duplicates(&[a.clone(), b], 0.05).len(), 2);
        // 0.05 over 11 dims is about 1.5% per dimension
        assert!((0.05 / 11f64.sqrt() - 0.015).abs() < 0.001);
    }

    proptest! {
        #[test]
        fn operators_stay_in_the_unit_cube(
            p1 in prop::collection::vec(0.0f64..=1.0, 11),
            p2 in prop::collection::vec(0.0f64..=1.0, 11),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = sbx_crossover(&p1, &p2, 15.0, &mut rng);
            let m = polynomial_mutation(&a, 20.0, 1.0, &mut rng);
            for v in a.iter().chain(&b).chain(&m) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn dedup_postcondition(pop in prop::collection::vec(prop::collection::vec(0.0f64..0.1, 3), 0..40)) {
            let kept = remove_duplicates(&pop, 0.05);
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    prop_assert!(distance(&kept[i], &kept[j]) >= 0.05);
                }
            }
            for x in &pop {
                prop_assert!(kept.iter().any(|k| distance(x, k) < 0.05 || k == x));
            }
        }
    }
}
