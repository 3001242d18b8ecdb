use ltc_snn::ann::*;
use ltc_snn::coding::{ExponentRange, LaVariant};
use ltc_snn::converter::convert;
use ltc_snn::data::{split, synthetic_images};
use ltc_snn::rate::{normalize_weights, run_rate_dataset, stable_index, RateEngine, ResetRule};
use ltc_snn::snn::{run_dataset, Backend, CompiledSnn};
use std::time::Instant;

fn main() {
    let t_all = Instant::now();
    let noise = 0.3;
    let full = synthetic_images(10, 1100, 28, 28, noise, 2024);
    let (train_set, _v, test_set) = split(&full, 7, (10_000, 0)).unwrap();
    let r = |a, b| ExponentRange::new(a, b).unwrap();
    let kinds = [
        (LayerKind::Dense { in_dim: 784, out_dim: 100 }, r(-3, 0), LaVariant::MultiPower),
        (LayerKind::Dense { in_dim: 100, out_dim: 10 }, r(-3, 4), LaVariant::MultiPower),
    ];
    let mut net = AnalogNetwork {
        layers: init_weights(&kinds, 12),
        input_range: r(-7, 0), input_variant: LaVariant::MultiPower,
        mode: ActivationMode::ReluLa,
    };
    let cfg = TrainConfig { learning_rate: 0.02, epochs: 8, batch_size: 32, lambda_excess: 0.1, momentum: 0.0, seed: 99 };
    let m = train(&mut net, &train_set, Some(&test_set), &cfg).unwrap();
    let ann_acc = m.last().unwrap().val_accuracy.unwrap();
    let snn = convert(&net).unwrap();
    let ltc = run_dataset(&CompiledSnn::compile(&snn, Backend::Float).unwrap(), &test_set).unwrap();
    let ltc_events = ltc.totals.synaptic_events as f64 / test_set.len() as f64;
    println!("ann {ann_acc:.4} snn {:.4} ltc events/img {ltc_events:.0} early {} (train {:?})",
        ltc.accuracy, ltc.totals.undesired_early, t_all.elapsed());
    let calib = train_set.take(200);
    let (normalized, _) = normalize_weights(&net, &calib.images, 99.9).unwrap();
    for rule in [ResetRule::Subtract, ResetRule::ToZero] {
        let t = Instant::now();
        let engine = RateEngine::compile(&normalized, rule).unwrap();
        let rate = run_rate_dataset(&engine, &test_set, 500, 31).unwrap();
        let accs: Vec<f64> = rate.curve.iter().map(|p| p.accuracy).collect();
        let si = stable_index(&accs, 0.001);
        let stable_cost = rate.curve[si].mean_cumulative_synaptic_events;
        println!("{rule}: final {:.4} stable_idx {si} stable_cost {stable_cost:.0} ratio {:.3} ({:?})",
            rate.final_accuracy, ltc_events / stable_cost, t.elapsed());
    }
    println!("total {:?}", t_all.elapsed());
}
