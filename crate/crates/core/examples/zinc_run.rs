//! Desk-scale training run on the bundled ZINC subset.
use std::io::Write;

use molvae::smiles::corpus_lines;
use molvae::vae::*;

fn main() {
    let out_dir = std::path::PathBuf::from(std::env::args().nth(1).expect("output directory"));
    std::fs::create_dir_all(&out_dir).unwrap();
    let text = std::fs::read_to_string("data/zinc_5k.smi").unwrap();
    let corpus: Vec<&str> = corpus_lines(&text).collect();
    let cfg = VaeConfig::default();
    let vocab = Vocabulary::build(&corpus, cfg.max_len).unwrap();
    let enc = encode_corpus(&corpus, &vocab, cfg.max_len).unwrap();
    let params = VaeParams::init(cfg, vocab, 20161006).unwrap();
    let tc = TrainConfig {
        epochs: 100,
        batch_size: 32,
        eval_subset: 500,
        valid_samples: 200,
        seed: 20161006,
        target_accuracy: std::env::var("TARGET_ACCURACY").map_or(Some(80.0), |v| v.parse().ok()),
        max_seconds: Some(std::env::var("MAX_SECONDS").map_or(7200.0, |v| v.parse().unwrap())),
        ..Default::default()
    };
    let mut log = std::fs::File::create(out_dir.join("metrics.jsonl")).unwrap();
    let out = train(&enc, params, &tc, |m| {
        writeln!(log, "{}", serde_json::to_string(m).unwrap()).unwrap();
        log.flush().unwrap();
    })
    .unwrap();
    save(&out.params, &out_dir.join("model.mvae")).unwrap();
}
