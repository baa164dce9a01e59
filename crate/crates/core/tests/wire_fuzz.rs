use std::panic::{catch_unwind, AssertUnwindSafe};

use maskcomp::codecs::{decode, encode, CodecConfig, SignMode};
use maskcomp::tensor::{SeededRng, Tensor};
use maskcomp::wire::{deserialize, frame_len, serialize};

fn random_config(rng: &mut SeededRng) -> CodecConfig {
    let ratio = rng.uniform() * 0.995;
    let bits = 1 + rng.below(8) as u8;
    match rng.below(5) {
        0 => CodecConfig::ms(ratio, bits),
        1 => CodecConfig::ms(ratio, bits).with_sign_mode(SignMode::SignBit),
        2 => CodecConfig::sp(ratio),
        3 => CodecConfig::qu(bits),
        _ => CodecConfig::rt(ratio, rng.next()),
    }
}

trait NextSeed {
    fn next(&mut self) -> u64;
}

impl NextSeed for SeededRng {
    fn next(&mut self) -> u64 {
        rand::RngCore::next_u64(self)
    }
}

fn random_input(rng: &mut SeededRng, signed: bool) -> Tensor<f32> {
    let ndims = 1 + rng.below(3);
    let shape: Vec<usize> = (0..ndims).map(|_| 1 + rng.below(12)).collect();
    let d: usize = shape.iter().product();
    let data = (0..d)
        .map(|_| {
            let v = match rng.below(4) {
                0 => 0.0,
                1 => rng.standard_normal() * 1e3,
                _ => rng.standard_normal(),
            };
            if signed { v as f32 } else { (v as f32).max(0.0) }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

fn valid_frames(n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let cfg = random_config(&mut rng);
        let signed = !matches!(cfg.codec, maskcomp::codecs::CodecKind::Ms) || cfg.sign_mode == SignMode::SignBit;
        let x = random_input(&mut rng, signed);
        let Ok(p) = encode(&x, &cfg) else { continue };
        out.push(serialize(&p).unwrap());
    }
    out
}

#[test]
fn fuzzed_payloads_roundtrip() {
    let mut rng = SeededRng::new(42);
    let mut done = 0;
    while done < 10_000 {
        let cfg = random_config(&mut rng);
        let signed = !matches!(cfg.codec, maskcomp::codecs::CodecKind::Ms) || cfg.sign_mode == SignMode::SignBit;
        let x = random_input(&mut rng, signed);
        let Ok(p) = encode(&x, &cfg) else { continue };
        let bytes = serialize(&p).unwrap();
        assert_eq!(bytes.len(), frame_len(&p));
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(serialize(&back).unwrap(), bytes);
        assert_eq!(decode(&back).unwrap(), decode(&p).unwrap());
        done += 1;
    }
}

#[test]
fn mutated_frames_never_panic() {
    let frames = valid_frames(500, 7);
    let mut rng = SeededRng::new(8);
    for frame in &frames {
        for _ in 0..20 {
            let mut bad = frame.clone();
            match rng.below(4) {
                0 => {
                    let i = rng.below(bad.len());
                    bad[i] ^= 1 << rng.below(8);
                }
                1 => bad.truncate(rng.below(bad.len())),
                2 => bad.extend((0..1 + rng.below(8)).map(|_| rng.below(256) as u8)),
                _ => {
                    let i = rng.below(bad.len());
                    bad[i] = rng.below(256) as u8;
                }
            }
            let result = catch_unwind(AssertUnwindSafe(|| {
                if let Ok(p) = deserialize(&bad) {
                    decode(&p).expect("frames that parse also decode");
                }
            }));
            assert!(result.is_ok(), "panic on {bad:?}");
        }
    }
}

#[test]
fn random_bytes_yield_typed_errors() {
    let mut rng = SeededRng::new(9);
    for _ in 0..5_000 {
        let len = rng.below(64);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.below(256) as u8).collect();
        if len >= 4 && rng.below(2) == 0 {
            bytes[..4].copy_from_slice(b"MSC1");
        }
        let result = catch_unwind(|| deserialize(&bytes).map(|p| decode(&p).map(|_| ())));
        let inner = result.expect("no panic");
        if let Err(e) = inner {
            assert!(e.code().starts_with('W'));
        }
    }
}
