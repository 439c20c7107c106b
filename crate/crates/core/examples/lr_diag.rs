use crispedge::config::{LossKind, RunConfig};
use crispedge::data::gen_synthetic;
use crispedge::eval::{default_thresholds, default_tolerance, EvalMode};
use crispedge::net::EdgeNet;
use crispedge::train::{evaluate_model, train};

fn main() {
    // args: lr decay_every epochs n_train variant(hfl|wce|nolap) [seed] [augment]
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args[1].parse().unwrap();
    let decay_every: usize = args[2].parse().unwrap();
    let epochs: usize = args[3].parse().unwrap();
    let n_train: usize = args[4].parse().unwrap();
    let variant = args.get(5).cloned().unwrap_or_else(|| "hfl".into());
    let seed: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0);
    let augment = args.get(7).map(|s| s == "aug").unwrap_or(false);
    let train_set = gen_synthetic(n_train, 64, 100).unwrap();
    let val = gen_synthetic(50, 64, 200).unwrap();
    let mut cfg = RunConfig::default();
    cfg.train.lr = lr;
    cfg.train.decay_every = decay_every;
    cfg.train.epochs = epochs;
    cfg.train.seed = seed;
    cfg.data.augment = augment;
    match variant.as_str() {
        "hfl" => {}
        "wce" => cfg.train.loss = LossKind::WeightedCe,
        "nolap" => cfg.net.laplacian_path = false,
        other => panic!("unknown variant {other}"),
    }
    let dir_name = format!("/tmp/ckpt_{variant}_{seed}");
    std::fs::create_dir_all(&dir_name).unwrap();
    let t0 = std::time::Instant::now();
    let out = train(&cfg, &train_set, &[], std::path::Path::new(&dir_name)).unwrap();
    for (i, l) in out.epoch_losses.iter().enumerate() {
        println!("epoch {i}: loss {l:.4}");
    }
    let net = EdgeNet::new(cfg.net.clone(), cfg.train.seed).unwrap();
    net.params().load(&out.final_checkpoint).unwrap();
    let rep = evaluate_model(&net, &val, EvalMode::CEval, &default_thresholds(), default_tolerance(64, 64)).unwrap();
    let rep_s = evaluate_model(&net, &val, EvalMode::SEval, &default_thresholds(), default_tolerance(64, 64)).unwrap();
    println!(
        "variant {variant} seed {seed} aug {augment}: C-Eval ODS {:.4} (t*={:.2}) S-Eval ODS {:.4} ({:.0}s)",
        rep.ods_f,
        rep.ods_threshold,
        rep_s.ods_f,
        t0.elapsed().as_secs_f64()
    );
}
