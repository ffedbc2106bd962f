//! Homomorphism search between labelled graphs and the core of a ditree.

use sirup::hom::{ditree_hom, hom_exists, Anchor};
use sirup::tree::core_ditree;
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    let q = LabelledGraph::parse("R(a,b). R(a,c). R(c,d). T(b). T(d).")?;
    let g = LabelledGraph::parse("R(u,v). R(v,u). T(u). T(v).")?;
    match hom_exists(&q, &g, &Anchor::none())? {
        Some(h) => {
            let pairs: Vec<_> = q.nodes().map(|v| format!("{}->{}", q.name(v), g.name(h[v]))).collect();
            println!("hom: {}", pairs.join(" "));
        }
        None => println!("no hom"),
    }
    println!("tree algorithm agrees: {}", ditree_hom(&q, &g, &Anchor::none())?.is_some());

    let redundant = LabelledGraph::parse("R(r,a). T(a). R(r,b). T(b). S(a,c).")?;
    let (core, minimal) = core_ditree(&redundant)?;
    println!("minimal: {minimal}; core:\n{}", core.to_text());
    Ok(())
}
