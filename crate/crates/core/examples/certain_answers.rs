//! Certain answers of the d-sirup, the goal program and the unary sirup on a
//! small instance.

use sirup::datalog::{build_programs, certain_answer_delta, fixpoint};
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    let q = LabelledGraph::parse("S(a,b). R(b,c). T(a). T(b). F(c).")?;
    let d = LabelledGraph::parse(
        "S(t1,t2). R(t2,b). S(b,a). R(a,f). R(t4,a). S(t3,t4).
         T(t1). T(t2). A(b). A(a). F(f). T(t4). T(t3).",
    )?;
    let ans = certain_answer_delta(&q, &d, false, 16)?;
    println!("certain answer: {} after {} models", ans.answer, ans.models);

    let progs = build_programs(&q)?;
    print!("goal program:\n{}", progs.pi);
    let closure = fixpoint(&progs.pi, &d);
    println!("goal derived: {} in {} rounds", closure.goal(&progs.pi), closure.rounds);
    let p: Vec<&str> = closure.facts("P").into_iter().map(|v| d.name(v)).collect();
    println!("P facts: {p:?}");
    Ok(())
}
