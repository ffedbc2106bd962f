//! FO-rewritability of two span-1 queries with the type graph and the local
//! analysis behind each verdict.

use sirup::lambda::{decide_fo, LambdaOptions};
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    let queries = [
        ("siblings", "R(y,x). F(x). R(y,z). T(z)."),
        ("twin-guarded", "R(n2,m). R(m,n1). R(n1,n0). R(n2,ft). R(ft,f). T(m). F(ft). T(ft). F(f)."),
    ];
    for (name, text) in queries {
        let q = LabelledGraph::parse(text)?;
        let d = decide_fo(&q, &LambdaOptions::default())?;
        let j = d.to_json();
        println!(
            "{name}: {} (types {}, black {}, blue {}, stable depth {})",
            j["result"]["verdict"], j["types"], j["black"], j["blue"], j["stable_depth"]
        );
    }
    Ok(())
}
