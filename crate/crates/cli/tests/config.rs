use mcdropout::data::Task;
use mcdropout::nn::Nonlinearity;
use mcdropout_cli::{Precision, RunConfig};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let net = (
        prop::bool::ANY,
        prop::collection::vec(1usize..200, 1..4),
        prop::sample::select(vec![Nonlinearity::Relu, Nonlinearity::Tanh, Nonlinearity::Identity]),
        prop::bool::ANY,
        prop::bool::ANY,
        0.01f64..=1.0,
        0.01f64..=1.0,
    );
    let prior = (
        prop::bool::ANY,
        1e-9f64..1e3,
        1e-3f64..10.0,
        1e-3f64..10.0,
        prop::bool::ANY,
    );
    let opt = (
        1e-5f64..1.0,
        0.0f64..1e-2,
        0.0f64..1.0,
        0.0f64..0.99,
        0usize..100_000,
        prop::option::of(1usize..512),
        any::<u64>(),
        1usize..10_000,
    );
    (net, prior, opt).prop_map(|(n, pr, o)| {
        let mut c = RunConfig::default();
        c.task = if n.0 { Task::Classification } else { Task::Regression };
        c.hidden = n.1;
        c.nonlinearity = n.2;
        c.scale_features = n.3;
        c.output_bias = n.4;
        c.input_keep_prob = n.5;
        c.keep_prob = n.6;
        c.precision = if pr.0 { Precision::Tau(pr.1) } else { Precision::WeightDecay(pr.1) };
        c.lengthscale = pr.2;
        c.bias_lengthscale = pr.3;
        c.k_scaling = pr.4;
        c.schedule.base_lr = o.0;
        c.schedule.gamma = o.1;
        c.schedule.power = o.2;
        c.schedule.momentum = o.3;
        c.schedule.iterations = o.4;
        c.schedule.batch_size = o.5;
        c.seed = o.6;
        c.samples = o.7;
        c
    })
}

proptest! {
    #[test]
    fn serialise_then_parse_is_identity(cfg in arb_config()) {
        let text = cfg.serialise();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialise(), text);
    }
}

#[test]
fn errors_name_the_line() {
    let err = RunConfig::parse("tau = 1\n# comment\n\nhiden = 3\n").unwrap_err();
    assert!(format!("{err:#}").contains("line 4"), "{err:#}");
    let err = RunConfig::parse("tau = 1\nseed = 1\nseed = 2\n").unwrap_err();
    assert!(format!("{err:#}").contains("line 3"), "{err:#}");
}
