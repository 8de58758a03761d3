use molvae::smiles::{canonicalize, corpus_lines, parse_smiles, validate};

fn main() {
    let path = std::env::args().nth(1).expect("corpus path");
    let text = std::fs::read_to_string(path).unwrap();
    let (mut ok, mut bad) = (0, 0);
    let t = std::time::Instant::now();
    for line in corpus_lines(&text) {
        let g = match parse_smiles(line) {
            Ok(g) => g,
            Err(e) => { println!("PARSE {line}: {e}"); bad += 1; continue; }
        };
        let r = validate(&g);
        if !r.valid { println!("INVALID {line}: {:?}", r.violations); bad += 1; continue; }
        let c = canonicalize(&g).unwrap();
        let c2 = canonicalize(&parse_smiles(&c).unwrap()).unwrap();
        if c != c2 { println!("CANON {line}: {c} vs {c2}"); bad += 1; continue; }
        ok += 1;
    }
    println!("ok {ok} bad {bad} in {:?}", t.elapsed());
}
