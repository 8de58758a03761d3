use molvae::vae::*;

fn main() {
    let s = std::env::args().nth(1).unwrap_or("CC(=O)Oc1ccccc1C(=O)O".into());
    let batch: usize = std::env::args().nth(2).map(|x| x.parse().unwrap()).unwrap_or(1);
    let lr: f64 = std::env::args().nth(3).map(|x| x.parse().unwrap()).unwrap_or(1e-3);
    let corpus = vec![s.clone(); batch];
    let cfg = VaeConfig::default();
    let vocab = Vocabulary::build(&corpus, cfg.max_len).unwrap();
    let enc = encode_corpus(&corpus, &vocab, cfg.max_len).unwrap();
    let params = VaeParams::init(cfg, vocab, 1).unwrap();
    println!("params {}", params.parameter_count());
    let kl: f64 = std::env::var("KL").map(|x| x.parse().unwrap()).unwrap_or(1.0);
    let epochs: usize = std::env::var("EPOCHS").map(|x| x.parse().unwrap()).unwrap_or(60);
    let tc = TrainConfig { epochs, kl_weight: kl, batch_size: batch, eval_subset: 1, adam: molvae::autodiff::AdamConfig { lr, ..Default::default() }, ..Default::default() };
    let t0 = std::time::Instant::now();
    let out = train(&enc, params, &tc, |m| println!("{:?} {:.1}s", (m.epoch, m.total_loss, m.kl, m.accuracy), t0.elapsed().as_secs_f64())).unwrap();
    let mu = out.params.encode(&s).unwrap().mu;
    println!("{:?}", out.params.decode(&mu, DecodeMode::Greedy, 0).unwrap().smiles);
}
