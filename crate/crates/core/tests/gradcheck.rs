use pathovc::diffcore::gradcheck::{check_primitive, relative_error, Primitive};
use pathovc::dsp::MelCepstrogram;
use pathovc::vqvae::{HVqVaeModel, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn primitives_hundred_cases_each() {
    for p in Primitive::ALL {
        let r = check_primitive(p, 100, 7).unwrap();
        assert_eq!(r.cases, 100);
        assert!(
            r.max_rel_error <= 1e-4,
            "{}: {:e}",
            p.name(),
            r.max_rel_error
        );
    }
}

// larger than the primitive step: the loss is O(1), so round-off dominates below this
const H: f64 = 1e-5;

fn tiny() -> ModelConfig {
    ModelConfig {
        n_coeffs: 5,
        hidden: 6,
        latent_dim: 3,
        codebook_size: 4,
        speaker_dim: 2,
        kernel: 3,
        ..ModelConfig::default()
    }
}

#[test]
fn composite_loss_against_frozen_differences() {
    let m = HVqVaeModel::new(tiny(), vec!["A".into(), "B".into()], 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = MelCepstrogram::new(
        (0..16 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        16,
        5,
    )
    .unwrap();
    let frozen = m.freeze_quantization(&x).unwrap();
    let (_, grads) = m.loss_and_gradients(&x, "B").unwrap();

    let mut worst = 0.0f64;
    let mut probe = m.clone();
    for _ in 0..150 {
        let i = rng.gen_range(0..m.parameters().len());
        let j = rng.gen_range(0..m.parameters()[i].len());
        let x0 = m.parameters()[i].data()[j];
        probe.parameters_mut()[i].data_mut()[j] = x0 + H;
        let up = probe.frozen_loss(&x, "B", &frozen).unwrap();
        probe.parameters_mut()[i].data_mut()[j] = x0 - H;
        let down = probe.frozen_loss(&x, "B", &frozen).unwrap();
        probe.parameters_mut()[i].data_mut()[j] = x0;
        let numeric = (up - down) / (2.0 * H);
        let e = relative_error(grads[i].data()[j], numeric);
        assert!(
            e <= 1e-4,
            "{}[{j}] rel {e:e}: analytic {} numeric {numeric}",
            m.parameter_names()[i],
            grads[i].data()[j]
        );
        worst = worst.max(e);
    }
    eprintln!("worst relative error {worst:e}");
    assert!(worst <= 1e-4);
}
