use super::payload::{Mask, Payload};
use super::select::select_top_k;
use super::{CodecConfig, CodecError, CodecKind, SignMode};
use crate::scalar::Scalar;
use crate::tensor::{SeededRng, Tensor};
use crate::wire::{prefer_key_value, PackedFields};

/// Builds an SP/RT payload for the ascending index set `selected`, storing
/// positions as key-value pairs when that is strictly cheaper than a 1-bit
/// mask.
fn sparse_payload<T: Scalar>(x: &Tensor<T>, selected: Vec<usize>, codec: CodecKind) -> Payload<T> {
    let values = x.data();
    let d = values.len();
    let k = selected.len();
    let top_values = selected.iter().map(|&i| values[i]).collect();
    let mask = if prefer_key_value(d, k) {
        Mask::Indices(selected)
    } else {
        let mut bits = PackedFields::zeroed(1, d);
        for &i in &selected {
            bits.set(i, 1);
        }
        Mask::Fields(bits)
    };
    Payload {
        codec,
        shape: x.shape().to_vec(),
        k,
        mask_bits: 0,
        quant_bits: 0,
        sign_mode: SignMode::NonNegativeOnly,
        top_values,
        mask,
        quant_range: None,
    }
}

/// Top-k sparsification: the `k` largest-magnitude values survive, all
/// others decode to zero.
pub fn sp_encode<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Payload<T>, CodecError> {
    cfg.expect(CodecKind::Sp)?;
    let k = cfg.retained(x.len())?;
    let selected = select_top_k(x.data(), k)?;
    Ok(sparse_payload(x, selected, CodecKind::Sp))
}

/// Randomized Top-k: `k` distinct indices drawn one at a time without
/// replacement, each draw with probability proportional to `|xᵢ|` among the
/// indices not yet taken (uniform once the remaining weight is zero).
///
/// Every draw rescans the weights, so encoding costs `O(d·k)`.
pub fn rt_encode<T: Scalar>(x: &Tensor<T>, cfg: &CodecConfig) -> Result<Payload<T>, CodecError> {
    cfg.expect(CodecKind::Rt)?;
    let k = cfg.retained(x.len())?;
    let mut rng = SeededRng::new(cfg.seed);
    let selected = sample_proportional(x.data(), k, &mut rng);
    Ok(sparse_payload(x, selected, CodecKind::Rt))
}

fn sample_proportional<T: Scalar>(values: &[T], k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let d = values.len();
    let mut weights: Vec<f64> = values.iter().map(|v| v.abs().as_f64()).collect();
    let mut taken = vec![false; d];
    let mut chosen = Vec::with_capacity(k);
    for draw in 0..k {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut last_positive = None;
            let mut hit = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    last_positive = Some(i);
                    if target < acc {
                        hit = Some(i);
                        break;
                    }
                }
            }
            hit.or(last_positive).expect("positive total has a positive weight")
        } else {
            let nth = rng.below(d - draw);
            (0..d)
                .filter(|&i| !taken[i])
                .nth(nth)
                .expect("fewer draws than elements")
        };
        taken[pick] = true;
        weights[pick] = 0.0;
        chosen.push(pick);
    }
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{compression_error, decode};
    use crate::tensor::{standard_normal, SeededRng};

    #[test]
    fn sp_identity_when_nothing_dropped() {
        let x = Tensor::from_vec(vec![3.0f32, 1.0, 2.0]).unwrap();
        let p = sp_encode(&x, &CodecConfig::sp(0.0)).unwrap();
        assert_eq!(decode(&p).unwrap(), x);
    }

    #[test]
    fn sp_keep_one() {
        let x = Tensor::from_vec(vec![3.0f64, 1.0, 2.0]).unwrap();
        let p = sp_encode(&x, &CodecConfig::sp(0.5)).unwrap();
        assert_eq!(p.k, 1);
        let y = decode(&p).unwrap();
        assert_eq!(y.data(), &[3.0, 0.0, 0.0]);
        let err = compression_error(&x, &y).unwrap();
        assert!((err.abs_error - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sp_popcount_is_k() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let x = standard_normal::<f32>(200, &mut rng);
            let p = sp_encode(&x, &CodecConfig::sp(0.9)).unwrap();
            match &p.mask {
                Mask::Fields(b) => assert_eq!(b.iter().filter(|&v| v == 1).count(), 20),
                Mask::Indices(_) => panic!("k/d = 0.1 should use a dense mask"),
            }
        }
    }

    #[test]
    fn very_sparse_switches_to_key_value() {
        let mut rng = SeededRng::new(4);
        let x = standard_normal::<f32>(1000, &mut rng);
        let p = sp_encode(&x, &CodecConfig::sp(0.99)).unwrap();
        assert!(p.is_key_value());
        let dense = decode(&sp_encode(&x, &CodecConfig::sp(0.95)).unwrap()).unwrap();
        assert_eq!(dense.data().iter().filter(|v| **v != 0.0).count(), 50);
        let y = decode(&p).unwrap();
        assert_eq!(y.data().iter().filter(|v| **v != 0.0).count(), 10);
    }

    #[test]
    fn rt_single_nonzero_is_always_picked() {
        let x = Tensor::from_vec(vec![0.0f64, 0.0, 4.0, 0.0]).unwrap();
        for seed in 0..100 {
            let p = rt_encode(&x, &CodecConfig::rt(0.75, seed)).unwrap();
            assert_eq!(decode(&p).unwrap(), x);
        }
    }

    #[test]
    fn rt_is_deterministic_per_seed() {
        let mut rng = SeededRng::new(8);
        let x = standard_normal::<f32>(300, &mut rng);
        let a = rt_encode(&x, &CodecConfig::rt(0.9, 17)).unwrap();
        let b = rt_encode(&x, &CodecConfig::rt(0.9, 17)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rt_draws_distinct_indices_even_from_zero_vector() {
        let x = Tensor::from_vec(vec![0.0f32; 10]).unwrap();
        let p = rt_encode(&x, &CodecConfig::rt(0.3, 5)).unwrap();
        assert_eq!(p.k, 7);
        match &p.mask {
            Mask::Fields(b) => assert_eq!(b.iter().filter(|&v| v == 1).count(), 7),
            Mask::Indices(i) => assert_eq!(i.len(), 7),
        }
        // one non-zero among zeros: the non-zero must be taken first
        let y = Tensor::from_vec(vec![0.0f32, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let p = rt_encode(&y, &CodecConfig::rt(0.6, 5)).unwrap();
        assert_eq!(decode(&p).unwrap().data()[2], 1.0);
    }

    #[test]
    fn rt_sampling_frequency() {
        // P(index 0) = 10/13 for a single proportional draw
        let x = Tensor::from_vec(vec![10.0f64, 1.0, 1.0, 1.0]).unwrap();
        let hits = (0..10_000u64)
            .filter(|&seed| {
                let p = rt_encode(&x, &CodecConfig::rt(0.75, seed)).unwrap();
                p.top_values[0] == 10.0
            })
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!(freq >= 0.70, "freq = {freq}");
        assert!((freq - 10.0 / 13.0).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn sparse_reconstruction_exact_on_kept_zero_elsewhere() {
        let mut rng = SeededRng::new(12);
        for seed in 0..20 {
            let x = standard_normal::<f64>(128, &mut rng);
            for cfg in [CodecConfig::sp(0.8), CodecConfig::rt(0.8, seed)] {
                let y = decode(&crate::codecs::encode(&x, &cfg).unwrap()).unwrap();
                for (a, b) in x.data().iter().zip(y.data()) {
                    assert!(*b == 0.0 || a == b);
                }
            }
        }
    }
}
