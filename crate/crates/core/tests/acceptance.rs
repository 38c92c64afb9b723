//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use symlab::autodiff::{gradient_check, LayerSpec, LossKind, Mode, Network, NetworkSpec, Targets};
use symlab::expansion::{collapse_image, expand_image, validate_factor, ExpansionConfig, FactorCheck, Fill};
use symlab::group::Transform;
use symlab::ising::{energy, sample_mirrored, IsingParams, SpinLattice};
use symlab::landscape::{
    compare_landscapes, degeneracy_profile, enumerate, flip_hidden_sign, permute_hidden_units,
    BiasMode, ConvVariant, EnumerateOptions, LandscapeLoss, LossLandscape, ScalarNetLayout,
    ScalarVariant, SignAssignment, TinyData, TinyNetSpec, DEFAULT_GRID, DEFAULT_TOL, SCALAR_HIDDEN,
};
use symlab::numerics::{gauss_legendre, integrate_semi_infinite};
use symlab::qcd::{
    energy_density_fixed_mass, eos_table, fit_report, lnz_boson, lnz_fermion, synthetic_target,
    temperature_grid, FitConfig, MassModel, MassModels, Species, DEFAULT_DT_FRACTION,
};
use symlab::replica::{
    report, symmetry_metric, train_replicas, ArchitectureId, DatasetSpec, ReplicaRunSpec,
};
use symlab::{Prng, Result, Tensor};

type Check = Result<(bool, String)>;

struct Suite {
    failures: usize,
}

impl Suite {
    /// Runs one criterion; exceeding `budget` is a failure.
    fn run(&mut self, id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) if took <= budget => (ok, detail),
            Ok((_, detail)) => (false, format!("{detail}; over the {budget:?} budget")),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failures += 1;
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id} {verdict} [{name}] {detail} ({:.2}s)", took.as_secs_f64());
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn quadrature() -> Check {
    let rule = gauss_legendre(50)?;
    let boson = integrate_semi_infinite(|x| x * x * (-(-x).exp_m1()).ln(), &rule, 5.0)?;
    let fermion = integrate_semi_infinite(|x| x * x * (-x).exp().ln_1p(), &rule, 5.0)?;
    let e_b = rel(boson, -PI.powi(4) / 45.0);
    let e_f = rel(fermion, 7.0 * PI.powi(4) / 360.0);
    let t: f64 = 0.3;
    let sb = PI * PI * t.powi(4) / 90.0;
    let e_pb = rel(t * lnz_boson(0.0, t, 16.0, &rule)?, 16.0 * sb);
    let e_pf = rel(t * lnz_fermion(0.0, t, 24.0, &rule)?, 0.875 * 24.0 * sb);
    Ok((
        e_b < 1e-6 && e_f < 1e-6 && e_pb < 1e-5 && e_pf < 1e-5,
        format!("integrals rel err {e_b:.1e}/{e_f:.1e}, pressures {e_pb:.1e}/{e_pf:.1e}"),
    ))
}

fn ising() -> Check {
    let zero = IsingParams::new(1.0, 0.0)?;
    let field = IsingParams::new(1.0, 0.45)?;
    let up = energy(&SpinLattice::all_up(5)?, &zero);
    let set = sample_mirrored(1000, 5, &Prng::new(2024))?;
    let mut flip_bad = 0;
    let mut field_bad = 0;
    for k in 0..1000 {
        if energy(&set[k], &zero) != energy(&set[1000 + k], &zero) {
            flip_bad += 1;
        }
        for s in [&set[k], &set[1000 + k]] {
            let expected = energy(s, &zero) - 0.45 * s.magnetization() as f64;
            if energy(s, &field) != expected {
                field_bad += 1;
            }
        }
    }
    Ok((
        up == -50.0 && flip_bad == 0 && field_bad == 0,
        format!("all-up E = {up}, flip violations {flip_bad}/1000, field violations {field_bad}/2000"),
    ))
}

fn grad_case(input: &[usize], layers: Vec<LayerSpec>, loss: LossKind, mode: Mode, seed: u64) -> Result<f64> {
    let net = Network::new(NetworkSpec::new(input.to_vec(), layers, loss))?;
    let n = 4;
    let mut rng = Prng::new(seed);
    let mut shape = vec![n];
    shape.extend_from_slice(input);
    let len: usize = shape.iter().product();
    let x = Tensor::new(shape, (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
    let out = net.output_shape()[0];
    let targets = match loss {
        LossKind::SoftmaxCrossEntropy => Targets::Classes((0..n).map(|k| k % out).collect()),
        LossKind::MeanSquaredError => {
            Targets::Values(Tensor::new(vec![n, out], (0..n * out).map(|_| rng.uniform(-1.0, 1.0)).collect())?)
        }
    };
    let params = net.init_params(&mut Prng::new(seed + 1));
    Ok(gradient_check(&net, &params, &x, &targets, mode, 1e-5)?.max_rel_error)
}

fn gradients() -> Check {
    use LayerSpec::*;
    let ce = LossKind::SoftmaxCrossEntropy;
    let mse = LossKind::MeanSquaredError;
    let cases: Vec<(&str, f64, Result<f64>)> = vec![
        ("dense+tanh", 1e-4, grad_case(&[3], vec![Dense { units: 4 }, Tanh, Dense { units: 2 }], mse, Mode::Train, 1)),
        ("sigmoid+softplus", 1e-4, grad_case(&[3], vec![Dense { units: 4 }, Sigmoid, Dense { units: 2 }, Softplus], mse, Mode::Train, 2)),
        (
            "conv+relu+maxpool+flatten",
            1e-4,
            grad_case(
                &[5, 5, 2],
                vec![Conv2d { filters: 3, kernel: 2 }, Relu, MaxPool2, Flatten, Dense { units: 3 }],
                ce,
                Mode::Train,
                3,
            ),
        ),
        (
            "batchnorm2d eval",
            1e-4,
            grad_case(&[4, 4, 2], vec![Conv2d { filters: 3, kernel: 2 }, Tanh, BatchNorm2d, Flatten, Dense { units: 2 }], ce, Mode::Eval, 4),
        ),
        (
            "batchnorm2d train",
            1e-3,
            grad_case(&[4, 4, 2], vec![Conv2d { filters: 3, kernel: 2 }, Tanh, BatchNorm2d, Flatten, Dense { units: 2 }], ce, Mode::Train, 5),
        ),
        (
            "dropout",
            1e-4,
            grad_case(&[6], vec![Dense { units: 8 }, Tanh, Dropout { rate: 0.3 }, Dense { units: 2 }], ce, Mode::Train, 6),
        ),
        (
            "augment",
            1e-4,
            grad_case(
                &[4, 4, 1],
                vec![Augment { transform: Transform::HFlip }, Conv2d { filters: 2, kernel: 2 }, Tanh, Flatten, Dense { units: 2 }],
                ce,
                Mode::Train,
                7,
            ),
        ),
    ];
    let mut ok = true;
    let mut worst = Vec::new();
    for (name, tol, err) in cases {
        let e = err?;
        ok &= e < tol;
        worst.push(format!("{name} {e:.1e}"));
    }
    Ok((ok, worst.join(", ")))
}

fn scalar_landscapes() -> Result<(LossLandscape, LossLandscape)> {
    let data = TinyData::scalar_grid(DEFAULT_GRID)?;
    let opts = EnumerateOptions {
        loss: LandscapeLoss::Mse,
        tol: DEFAULT_TOL,
        seed: 0,
        workers: 8,
    };
    Ok((
        enumerate(&TinyNetSpec::scalar(ScalarVariant::Raw, BiasMode::None), &data, &opts)?,
        enumerate(&TinyNetSpec::scalar(ScalarVariant::Expanded, BiasMode::None), &data, &opts)?,
    ))
}

fn symmetry_pairs(land: &LossLandscape, layout: &ScalarNetLayout, pairs: usize, rng: &mut Prng) -> Result<usize> {
    let groups = land.group_of_config();
    let bits = layout.bits();
    let mut violations = 0;
    for _ in 0..pairs {
        let index = rng.below(1 << bits) as u64;
        let w = SignAssignment::new(index, bits)?.weights();
        let layer = 1 + rng.below(3);
        let width = SCALAR_HIDDEN[layer - 1];
        let a = rng.below(width);
        let moved = if rng.bernoulli(0.5) {
            let b = (a + 1 + rng.below(width - 1)) % width;
            permute_hidden_units(layout, &w, layer, a, b)?
        } else {
            flip_hidden_sign(layout, &w, layer, a)?
        };
        let partner = SignAssignment::from_weights(&moved)?.index;
        if groups[index as usize] != groups[partner as usize] {
            violations += 1;
        }
    }
    Ok(violations)
}

fn convnets() -> Check {
    let data = TinyData::two_by_two();
    let opts = EnumerateOptions {
        loss: LandscapeLoss::CrossEntropy,
        ..EnumerateOptions::default()
    };
    let run = |v| enumerate(&TinyNetSpec::convnet(v), &data, &opts);
    let base = run(ConvVariant::Baseline)?;
    let drop = run(ConvVariant::Dropout)?;
    let bn = run(ConvVariant::Batchnorm)?;
    let eq = run(ConvVariant::Equivariant)?;
    let wrong = run(ConvVariant::WrongEquivariant)?;
    let p = |l: &LossLandscape| degeneracy_profile(l).plateau_fraction;
    let cmp = compare_landscapes(&eq, &wrong)?;
    let ok = p(&base) > p(&drop)
        && p(&base) > p(&bn)
        && cmp.min_loss_b > cmp.min_loss_a
        && eq.len() < base.len();
    Ok((
        ok,
        format!(
            "plateau baseline {:.4} dropout {:.4} batchnorm {:.4}; min loss equivariant {:.4} wrong {:.4}; configs {} vs {}",
            p(&base),
            p(&drop),
            p(&bn),
            cmp.min_loss_a,
            cmp.min_loss_b,
            eq.len(),
            base.len()
        ),
    ))
}

fn replica_properties() -> Result<(bool, String)> {
    let mut rng = Prng::new(77);
    let w = Tensor::new(vec![6, 40], (0..240).map(|_| rng.normal(0.0, 1.0)).collect())?;
    let m = symmetry_metric(&w, 100, 50, 2.0)?;
    let perm = rng.permutation(6);
    let shuffled = symmetry_metric(&w.gather(&perm)?, 100, 50, 2.0)?;
    let same = Tensor::stack(&vec![w.item_tensor(0); 4])?;
    let zero = symmetry_metric(&same, 100, 50, 2.0)?;

    let mut tiny = ReplicaRunSpec::desk(ArchitectureId::DropoutCnn);
    tiny.dataset = DatasetSpec::Bars { n: 40, test_n: 40, seed: 5 };
    tiny.seeds = vec![1, 2, 3, 4];
    tiny.train.epochs = 3;
    let a = serde_json::to_string(&report(&tiny, &train_replicas(&tiny)?)?)?;
    let b = serde_json::to_string(&report(&tiny, &train_replicas(&tiny)?)?)?;

    let ok = m.distances.len() == 15
        && zero.metric_mean == 0.0
        && shuffled.metric_mean == m.metric_mean
        && a == b;
    Ok((
        ok,
        format!(
            "pairs {}, identical-replica metric {}, reorder delta {:e}, reproducible {}",
            m.distances.len(),
            zero.metric_mean,
            shuffled.metric_mean - m.metric_mean,
            a == b
        ),
    ))
}

fn replica_desk() -> Check {
    let (props_ok, props) = replica_properties()?;
    let mut metric_wins = 0;
    let mut acc_wins = 0;
    let mut lines = Vec::new();
    for rerun in 0..3u64 {
        let mut stats = Vec::new();
        for arch in [
            ArchitectureId::SimpleCnn,
            ArchitectureId::FlipEquivarianceCnn,
            ArchitectureId::RotationEquivarianceCnn,
        ] {
            let mut spec = ReplicaRunSpec::desk(arch);
            spec.seeds = (1..=20).map(|s| s + 100 * rerun).collect();
            if let DatasetSpec::Bars { seed, .. } = &mut spec.dataset {
                *seed = rerun;
            }
            let rep = report(&spec, &train_replicas(&spec)?)?;
            stats.push((rep.metric_mean, rep.mean_test_accuracy));
        }
        let (simple, flip, rot) = (stats[0], stats[1], stats[2]);
        metric_wins += usize::from(flip.0 > simple.0);
        acc_wins += usize::from(flip.1 >= rot.1);
        lines.push(format!(
            "rerun {rerun}: mean flip {:.4} simple {:.4}, acc flip {:.3} rot {:.3}",
            flip.0, simple.0, flip.1, rot.1
        ));
    }
    // Majority over the reruns.
    let ok = props_ok && metric_wins >= 2 && acc_wins >= 2;
    Ok((
        ok,
        format!(
            "{props}; flip > simple in {metric_wins}/3, flip acc >= rot in {acc_wins}/3 [{}]",
            lines.join("; ")
        ),
    ))
}

fn qcd() -> Check {
    let rule = gauss_legendre(50)?;
    let temps = temperature_grid(0.1, 0.5, 41)?;
    let constant = MassModels::constant(0.6, 0.3, 0.4);
    let table = MassModels {
        gluon: MassModel::Table {
            temps: vec![0.09, 0.2, 0.6],
            masses: vec![1.2, 0.7, 0.9],
        },
        ..MassModels::constant(0.0, 0.2, 0.3)
    };
    let target = synthetic_target(&constant, &temperature_grid(0.1, 0.5, 17)?, &rule)?;
    let fit = fit_report(&target, &FitConfig::default())?;

    let mut worst_identity: f64 = 0.0;
    for models in [&MassModels::massless(), &constant, &table, &fit.raw.models, &fit.expanded.models] {
        for pt in eos_table(&temps, models, &rule, DEFAULT_DT_FRACTION)? {
            let s = (pt.energy_density() + pt.pressure()) / pt.t();
            worst_identity = worst_identity.max(rel(pt.entropy_density(), s));
        }
    }
    let mut worst_eps: f64 = 0.0;
    for pt in eos_table(&temps, &constant, &rule, DEFAULT_DT_FRACTION)? {
        let analytic = [(Species::Gluon, 0.6), (Species::Light, 0.3), (Species::Strange, 0.4)]
            .iter()
            .map(|&(s, m)| energy_density_fixed_mass(s.statistics(), m, pt.t(), s.dof(), &rule))
            .sum::<Result<f64>>()?;
        worst_eps = worst_eps.max(rel(pt.energy_density(), analytic));
    }
    let (raw, exp) = (fit.raw.mae_p_over_t4, fit.expanded.mae_p_over_t4);
    Ok((
        worst_identity <= 1e-10 && worst_eps < 1e-4 && raw < 1e-2 && exp < 1e-2,
        format!(
            "entropy identity {worst_identity:.1e}, eps vs analytic {worst_eps:.1e}, MAE(P/T^4) raw {raw:.2e} expanded {exp:.2e}"
        ),
    ))
}

fn expansion() -> Check {
    let mut rng = Prng::new(9);
    let img = Tensor::new(vec![7, 6, 3], (0..126).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
    let fills = [
        Fill::constant(0.0),
        Fill::constant(0.25),
        Fill::constant(0.5),
        Fill::constant(1.0),
        Fill::random(),
    ];
    let mut mismatches = 0;
    for k in 1..=5 {
        for fill in &fills {
            let cfg = ExpansionConfig::new(k, fill.clone());
            let out = expand_image(&img, &cfg, &mut Prng::new(k as u64))?;
            if out.shape() != [7 * k, 6 * k, 3] || collapse_image(&out, k)? != img {
                mismatches += 1;
            }
        }
    }
    let mut warn_errors = 0;
    for kernel in 1..=5 {
        for k in 1..=6 {
            let warned = matches!(
                validate_factor(&ExpansionConfig::new(k, Fill::default()).with_kernel(kernel)),
                FactorCheck::Warning(_)
            );
            if warned != (k > kernel) {
                warn_errors += 1;
            }
        }
    }
    Ok((
        mismatches == 0 && warn_errors == 0,
        format!("reconstruction mismatches {mismatches}/25, warning mismatches {warn_errors}/30"),
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "quadrature oracles", Duration::from_secs(1), quadrature);
    suite.run(2, "ising", Duration::from_secs(1), ising);
    suite.run(3, "gradient checks", Duration::from_secs(30), gradients);

    let mut scalar = None;
    suite.run(4, "scalar landscape degeneracy", Duration::from_secs(600), || {
        let (raw, expanded) = scalar_landscapes()?;
        let cmp = compare_landscapes(&raw, &expanded)?;
        let ok = raw.len() == 1 << 20 && expanded.len() == 1 << 23 && cmp.distinct_b > cmp.distinct_a;
        scalar = Some((raw, expanded));
        Ok((ok, format!("distinct levels raw {} expanded {}", cmp.distinct_a, cmp.distinct_b)))
    });
    suite.run(5, "landscape symmetries", Duration::from_secs(60), || {
        let (raw, expanded) = scalar.take().ok_or_else(|| {
            symlab::Error::InvalidArgument("criterion 4 produced no landscapes".into())
        })?;
        let mut rng = Prng::new(5);
        let v_raw = symmetry_pairs(&raw, &ScalarNetLayout::new(ScalarVariant::Raw, BiasMode::None), 10_000, &mut rng)?;
        let v_exp = symmetry_pairs(&expanded, &ScalarNetLayout::new(ScalarVariant::Expanded, BiasMode::None), 10_000, &mut rng)?;
        Ok((
            v_raw == 0 && v_exp == 0,
            format!("violations raw {v_raw}/10000, expanded {v_exp}/10000"),
        ))
    });
    suite.run(6, "convnet variants", Duration::from_secs(60), convnets);
    suite.run(7, "replica metric", Duration::from_secs(900), replica_desk);
    suite.run(8, "qcd self-consistency", Duration::from_secs(300), qcd);
    suite.run(9, "expansion transform", Duration::from_secs(1), expansion);

    if suite.failures == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 9 criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
