use hmum_cli::commands::{cmd_evaluate, cmd_gen_data, cmd_score, cmd_simulate, cmd_train, cmd_weights_train};
use hmum_cli::config::RunConfig;
use hmum_cli::pipeline::prepare;
use hmum_core::hum::{infer_batch, HumModel};
use hmum_core::metrics::qini_continuous;
use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(11);
    let n: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100_000);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(8);
    let start = Instant::now();

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.seed = seed;
    cfg.out = dir.path().join("kl");
    cfg.gen.n = n;
    cfg.gen.bins = 16;
    cfg.gen.noise_sd = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    cfg.embed_dim = 8;
    cfg.experts = 4;
    cfg.expert_hidden = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(16);
    cfg.tower_hidden = cfg.expert_hidden;
    cfg.max_epochs = epochs;
    cfg.weight_max_epochs = 6;

    cmd_gen_data(&cfg).unwrap();
    cmd_train(&cfg).unwrap();
    let eval_kl = cmd_evaluate(&cfg, &cfg.out.clone()).unwrap();
    let mut cfg0 = cfg.clone();
    cfg0.lambda_kl = 0.0;
    cfg0.out = dir.path().join("nokl");
    cmd_train(&cfg0).unwrap();
    let eval_nokl = cmd_evaluate(&cfg0, &cfg0.out.clone()).unwrap();

    cmd_score(&cfg, &cfg.out.clone()).unwrap();
    cmd_weights_train(&cfg, &cfg.out.join("requests.jsonl"), &cfg.out.join("request_schema.json")).unwrap();
    let report = cmd_simulate(&cfg, &cfg.out.join("score_store.csv"), &cfg.out.join("weight_model.json"), &cfg.out.join("requests.jsonl")).unwrap();

    // oracle qini per cell on the test split
    let data = prepare(&cfg).unwrap();
    let world = data.synthetic.as_ref().unwrap();
    let idx: HashMap<&str, usize> = world.raw.iter().enumerate().map(|(i, r)| (r.user_id.as_str(), i)).collect();
    println!("--- seed {seed} n {n} epochs {epochs} ---");
    for r in 0..2 {
        for k in 1..=2 {
            let subset: Vec<_> = data.test.iter().filter(|i| i.t == 0 || i.t == k).collect();
            let scores: Vec<f64> = subset.iter().map(|i| world.truth.tau(idx[i.user_id.as_str()], k, r)).collect();
            let treated: Vec<bool> = subset.iter().map(|i| i.t == k).collect();
            let y: Vec<f64> = subset.iter().map(|i| i.y[r]).collect();
            let (_, oracle) = qini_continuous(&scores, &treated, &y).unwrap();
            let model_q = eval_kl.reports.iter().find(|c| c.treatment == k && c.response == format!("response_{}", r + 1)).unwrap().qini;
            let nokl_q = eval_nokl.reports.iter().find(|c| c.treatment == k && c.response == format!("response_{}", r + 1)).unwrap().qini;
            println!("cell k={k} r={}: oracle {:.4} model_kl {:.4} ({:.2}x) model_nokl {:.4}", r + 1, oracle, model_q, model_q / oracle, nokl_q);
        }
    }

    // control gap kl vs nokl
    for (label, out) in [("kl", &cfg.out), ("nokl", &cfg0.out)] {
        let mut gaps = Vec::new();
        for r in 0..2 {
            let model = HumModel::load(&out.join(format!("hum_r{}.json", r + 1))).unwrap();
            let xs: Vec<&[usize]> = data.test.iter().map(|i| i.x.as_slice()).collect();
            let ests = infer_batch(&model, &xs).unwrap();
            let gap: f64 = ests.iter().map(|e| e.control_gap()).sum::<f64>() / ests.len() as f64;
            gaps.push(gap);
        }
        println!("gap_{label}: r1 {:.5} r2 {:.5} avg {:.5}", gaps[0], gaps[1], (gaps[0] + gaps[1]) / 2.0);
    }

    for p in &report.policies {
        println!("policy {:>10}: {:.5}", p.name, p.mean_weighted_outcome);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    let _ = PathBuf::new();
}
