//! Classifies every query in `fixtures/`.

use sirup::classify::{classify, ClassifyOptions};
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("fixtures directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cq"))
        .collect();
    files.sort();
    for path in files {
        let q = LabelledGraph::parse(&std::fs::read_to_string(&path).expect("readable fixture"))?;
        let c = classify(&q, &ClassifyOptions::default())?;
        let name = path.file_name().unwrap().to_string_lossy();
        match c.exact {
            Some(e) => println!("{name}: {}", e.as_str()),
            None => {
                let lower: Vec<_> = c.lower_bounds.iter().map(|l| l.as_str()).collect();
                let upper: Vec<_> = c.upper_bounds.iter().map(|u| u.as_str()).collect();
                println!("{name}: lower {lower:?}, upper {upper:?}");
            }
        }
    }
    Ok(())
}
