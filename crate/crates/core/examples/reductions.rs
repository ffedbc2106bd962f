//! Reachability reductions checked against the brute-force evaluator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sirup::classify::nl_hardness;
use sirup::datalog::certain_answer_delta;
use sirup::reduce::{dag_reduction, random_dag, random_undirected, undirected_reduction};
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let chain = LabelledGraph::parse("R(a,b). R(b,c). T(a). F(c).")?;
    let w = nl_hardness(&chain)?.expect("comparable pair");
    for _ in 0..5 {
        let g = random_dag(&mut rng, 4, 5);
        let data = dag_reduction(&chain, &w.pair, &g)?;
        let ans = certain_answer_delta(&chain, &data, false, 22)?.answer;
        println!("dag {:?}: reachable {} answer {ans}", g.edges, g.reachable());
    }

    let sym = LabelledGraph::parse("R(y,x). F(x). R(y,z). T(z).")?;
    for _ in 0..5 {
        let g = random_undirected(&mut rng, 5, 0.3);
        let data = undirected_reduction(&sym, &g)?;
        let ans = certain_answer_delta(&sym, &data, false, 22)?.answer;
        println!("undirected {:?}: connected {} answer {ans}", g.edges, g.reachable());
    }
    Ok(())
}
