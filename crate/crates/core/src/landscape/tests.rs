use super::scalar::{forward_weights, loss_of};
use super::*;
use crate::numerics::{Prng, Tensor};
use proptest::prelude::*;

fn opts(loss: LandscapeLoss) -> EnumerateOptions {
    EnumerateOptions {
        loss,
        ..EnumerateOptions::default()
    }
}

#[test]
fn assignment_bit_order() {
    let a = SignAssignment::new(0b100, 3).unwrap();
    assert_eq!(a.weights(), vec![1.0, -1.0, -1.0]);
    assert_eq!(SignAssignment::from_weights(&a.weights()).unwrap(), a);
    assert!(SignAssignment::new(8, 3).is_err());
    assert!(SignAssignment::from_weights(&[0.5]).is_err());
}

#[test]
fn scalar_forward_examples() {
    let raw = ScalarNetLayout::new(ScalarVariant::Raw, BiasMode::None);
    assert_eq!(raw.bits(), 20);
    for idx in [0u64, 12345, (1 << 20) - 1] {
        let a = SignAssignment::new(idx, 20).unwrap();
        let y = scalar_net_forward(&a, 0.0, ScalarVariant::Raw, BiasMode::None, 0.5).unwrap();
        assert_eq!(y, 0.0);
    }
    let ones = SignAssignment::new((1 << 20) - 1, 20).unwrap();
    let y = scalar_net_forward(&ones, 1.0, ScalarVariant::Raw, BiasMode::None, 0.5).unwrap();
    let expected = 2.0 * (3.0 * (3.0 * 1.0f64.tanh()).tanh()).tanh();
    assert!((y - expected).abs() < 1e-15);
    assert!((y - 1.98849).abs() < 5e-4, "{y}");

    let ones23 = SignAssignment::new((1 << 23) - 1, 23).unwrap();
    let y = scalar_net_forward(&ones23, 0.0, ScalarVariant::Expanded, BiasMode::None, 0.5).unwrap();
    assert!(y.abs() > 0.1);
    assert!(scalar_net_forward(&ones, 0.0, ScalarVariant::Expanded, BiasMode::None, 0.5).is_err());
}

#[test]
fn scalar_enumeration_matches_direct_forward() {
    for (variant, bias) in [
        (ScalarVariant::Raw, BiasMode::None),
        (ScalarVariant::Raw, BiasMode::EnumeratedFirstLayer),
    ] {
        let spec = TinyNetSpec::scalar(variant, bias);
        let land = enumerate(&spec, &TinyData::scalar_grid(16).unwrap(), &opts(LandscapeLoss::Mse)).unwrap();
        let layout = ScalarNetLayout::new(variant, bias);
        assert_eq!(land.len(), 1 << layout.bits());
        assert_eq!(land.multiplicities.iter().sum::<usize>(), land.len());
        let samples = crate::datasets::gen_scalar_dataset(16).unwrap();
        let mut rng = Prng::new(3);
        for _ in 0..300 {
            let rank = rng.below(land.len());
            let id = land.config_ids[rank];
            let w = SignAssignment::new(u64::from(id), layout.bits()).unwrap().weights();
            assert_eq!(loss_of(&layout, &w, 0.5, &samples), land.losses[rank]);
        }
    }
}

#[test]
fn enumeration_is_independent_of_worker_count() {
    let spec = TinyNetSpec::scalar(ScalarVariant::Raw, BiasMode::None);
    let data = TinyData::scalar_grid(8).unwrap();
    let one = enumerate(&spec, &data, &EnumerateOptions { workers: 1, ..opts(LandscapeLoss::Mse) }).unwrap();
    let three = enumerate(&spec, &data, &EnumerateOptions { workers: 3, ..opts(LandscapeLoss::Mse) }).unwrap();
    assert_eq!(one, three);
    assert!(one.losses.windows(2).all(|w| w[0] >= w[1]));
}

fn scalar_layout() -> impl Strategy<Value = ScalarNetLayout> {
    prop_oneof![
        Just(ScalarNetLayout::new(ScalarVariant::Raw, BiasMode::None)),
        Just(ScalarNetLayout::new(ScalarVariant::Expanded, BiasMode::None)),
        Just(ScalarNetLayout::new(ScalarVariant::Raw, BiasMode::EnumeratedFirstLayer)),
    ]
}

proptest! {
    #[test]
    fn hidden_unit_symmetries_preserve_output(
        layout in scalar_layout(),
        seed in any::<u64>(),
        layer in 1usize..=3,
        x in 0.0..1.0f64,
    ) {
        let mut rng = Prng::new(seed);
        let w = SignAssignment::new(rng.below(1 << layout.bits()) as u64, layout.bits()).unwrap().weights();
        let width = SCALAR_HIDDEN[layer - 1];
        let (a, b) = (rng.below(width), rng.below(width));
        let input = layout.input(x, 0.5);
        let y = forward_weights(&layout, &w, &input);
        let swapped = permute_hidden_units(&layout, &w, layer, a, b).unwrap();
        let flipped = flip_hidden_sign(&layout, &w, layer, a).unwrap();
        prop_assert!((forward_weights(&layout, &swapped, &input) - y).abs() < 1e-12);
        prop_assert!((forward_weights(&layout, &flipped, &input) - y).abs() < 1e-12);
        prop_assert_eq!(permute_hidden_units(&layout, &swapped, layer, a, b).unwrap(), w);
    }
}

#[test]
fn symmetry_helpers_validate() {
    let layout = ScalarNetLayout::new(ScalarVariant::Raw, BiasMode::None);
    let w = vec![1.0; 20];
    assert!(permute_hidden_units(&layout, &w, 0, 0, 1).is_err());
    assert!(permute_hidden_units(&layout, &w, 3, 0, 2).is_err());
    assert!(flip_hidden_sign(&layout, &w[..5], 1, 0).is_err());
}

fn img(p: [f64; 4]) -> Tensor {
    Tensor::new(vec![2, 2, 1], p.to_vec()).unwrap()
}

fn layout(variant: ConvVariant) -> ConvNetLayout {
    ConvNetLayout::from_spec(&TinyNetSpec::convnet(variant)).unwrap()
}

#[test]
fn convnet_zero_image_gives_uniform_logits() {
    let l = layout(ConvVariant::Baseline);
    assert_eq!(l.bits(), 16);
    let a = SignAssignment::new(0xBEEF, 16).unwrap();
    let out = convnet2x2_forward(&l, &a, &[img([0.0; 4])], None).unwrap();
    assert_eq!(out, vec![[0.0, 0.0]]);
}

#[test]
fn orbit_average_examples() {
    let l = layout(ConvVariant::Baseline);
    let a = SignAssignment::new(0x1234, 16).unwrap();
    let x = img([1.0, 0.0, -1.0, 1.0]);
    let base = convnet2x2_forward(&l, &a, &[x.clone()], None).unwrap()[0];
    assert_eq!(orbit_average_forward(&l, &a, &x, &crate::group::TransformGroup::trivial()).unwrap(), base);
    let sym = img([1.0; 4]);
    let base_sym = convnet2x2_forward(&l, &a, &[sym.clone()], None).unwrap()[0];
    for g in [crate::group::TransformGroup::flips(), crate::group::TransformGroup::rotations()] {
        assert_eq!(orbit_average_forward(&l, &a, &sym, &g).unwrap(), base_sym);
    }
}

#[test]
fn equivariant_output_is_exactly_invariant() {
    let eq = layout(ConvVariant::Equivariant);
    let group = crate::group::TransformGroup::flips();
    let mut images = Vec::new();
    for code in 0..81u32 {
        let mut p = [0.0; 4];
        let mut c = code;
        for v in &mut p {
            *v = f64::from(c % 3) - 1.0;
            c /= 3;
        }
        images.push(img(p));
    }
    for index in (0..1u64 << 16).step_by(97) {
        let a = SignAssignment::new(index, 16).unwrap();
        let out = convnet2x2_forward(&eq, &a, &images, None).unwrap();
        for &g in group.elements() {
            let moved: Vec<Tensor> = images.iter().map(|x| g.apply(x).unwrap()).collect();
            assert_eq!(convnet2x2_forward(&eq, &a, &moved, None).unwrap(), out);
        }
    }
}

#[test]
fn canonical_bank_counts() {
    let flips = canonical_filter_banks(2, &crate::group::TransformGroup::flips());
    let rots = canonical_filter_banks(2, &crate::group::TransformGroup::rotations());
    assert_eq!(flips.len(), 76);
    assert_eq!(rots.len(), 70);
    // Burnside: orbits of {±1}^8 under a group acting on both filters.
    assert_eq!(flips.len(), (256 + 16 + 16 + 16) / 4);
    assert_eq!(rots.len(), (256 + 4 + 16 + 4) / 4);
    assert_eq!(canonical_filter_banks(2, &crate::group::TransformGroup::trivial()).len(), 256);
}

#[test]
fn convnet_variant_ordering_on_the_shipped_set() {
    let data = TinyData::two_by_two();
    let o = opts(LandscapeLoss::CrossEntropy);
    let run = |v| enumerate(&TinyNetSpec::convnet(v), &data, &o).unwrap();
    let base = run(ConvVariant::Baseline);
    let drop = run(ConvVariant::Dropout);
    let bn = run(ConvVariant::Batchnorm);
    let eq = run(ConvVariant::Equivariant);
    let weq = run(ConvVariant::WrongEquivariant);
    assert_eq!(base.len(), 65_536);
    assert_eq!(bn.len(), 1 << 18);
    assert_eq!(eq.len(), 76 * 256);
    assert_eq!(weq.len(), 70 * 256);
    let p = |l: &LossLandscape| degeneracy_profile(l).plateau_fraction;
    assert!(p(&base) > p(&drop), "{} vs {}", p(&base), p(&drop));
    assert!(p(&base) > p(&bn), "{} vs {}", p(&base), p(&bn));
    let cmp = compare_landscapes(&eq, &weq).unwrap();
    assert!(cmp.min_loss_b > cmp.min_loss_a);
    assert!(cmp.count_a < base.len());
    let again = run(ConvVariant::Dropout);
    assert_eq!(again, drop);
}

#[test]
fn unshifted_batchnorm_cannot_split_the_plateau() {
    let data = TinyData::two_by_two();
    let mut spec = TinyNetSpec::convnet(ConvVariant::Batchnorm);
    if let TinyNetSpec::Convnet2x2 { bn_shift, .. } = &mut spec {
        *bn_shift = BnShift::Zero;
    }
    let o = opts(LandscapeLoss::CrossEntropy);
    let bn = enumerate(&spec, &data, &o).unwrap();
    let base = enumerate(&TinyNetSpec::convnet(ConvVariant::Baseline), &data, &o).unwrap();
    assert_eq!(bn.len(), base.len());
    assert!(degeneracy_profile(&bn).plateau_fraction >= degeneracy_profile(&base).plateau_fraction);
}

#[test]
fn profiles_and_comparisons() {
    let meta = |id: &str| LandscapeMeta {
        spec: TinyNetSpec::convnet(ConvVariant::Baseline),
        dataset_id: id.into(),
        seed: 0,
        loss: LandscapeLoss::CrossEntropy,
        tol: DEFAULT_TOL,
        bits: 2,
    };
    let flat = LossLandscape::build(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], meta("a"));
    let p = degeneracy_profile(&flat);
    assert_eq!((p.distinct_levels, p.plateau_fraction), (1, 1.0));
    let distinct = LossLandscape::build(vec![(0, 0.1), (1, 0.2), (2, 0.3), (3, 0.4)], meta("a"));
    assert_eq!(degeneracy_profile(&distinct).max_multiplicity, 1);
    assert_eq!(distinct.config_ids, vec![3, 2, 1, 0]);
    let same = compare_landscapes(&distinct, &distinct).unwrap();
    assert_eq!((same.min_loss_a, same.distinct_a, same.plateau_a), (same.min_loss_b, same.distinct_b, same.plateau_b));
    let other = LossLandscape::build(vec![(0, 0.1)], meta("b"));
    assert!(compare_landscapes(&distinct, &other).is_err());
    let mut buf = Vec::new();
    flat.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("rank,loss,multiplicity_group_id\n"));
    assert_eq!(flat.group_of_config(), vec![0, 0, 0, 0]);
    assert_eq!(flat.profile_json()["config_count"], 4);
}

#[test]
fn bit_cap_and_mismatched_data() {
    let big = TinyNetSpec::Convnet2x2 {
        variant: ConvVariant::Baseline,
        bias: BiasMode::None,
        filters: 3,
        hidden: 3,
        dropout_masks: 8,
        dropout_rate: 0.3,
        bn_shift: BnShift::Enumerated,
    };
    let err = enumerate(&big, &TinyData::two_by_two(), &opts(LandscapeLoss::CrossEntropy)).unwrap_err();
    assert!(err.to_string().contains("27"), "{err}");
    let scalar = TinyNetSpec::scalar(ScalarVariant::Raw, BiasMode::None);
    assert!(enumerate(&scalar, &TinyData::two_by_two(), &opts(LandscapeLoss::Mse)).is_err());
    assert!(enumerate(&scalar, &TinyData::scalar_grid(4).unwrap(), &opts(LandscapeLoss::CrossEntropy)).is_err());
}

#[test]
fn spec_json() {
    let s: TinyNetSpec = serde_json::from_str(r#"{"family":"convnet2x2","variant":"wrong_equivariant"}"#).unwrap();
    assert_eq!(s, TinyNetSpec::convnet(ConvVariant::WrongEquivariant));
    let s: TinyNetSpec =
        serde_json::from_str(r#"{"family":"scalar_net","variant":"expanded","bias":"enumerated_first_layer"}"#).unwrap();
    assert_eq!(s.bit_count(), 26);
    assert!(serde_json::from_str::<TinyNetSpec>(r#"{"family":"scalar_net","variant":"raw","width":4}"#).is_err());
}
