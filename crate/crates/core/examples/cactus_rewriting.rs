//! Cactus enumeration, a UCQ rewriting and the focusedness probe.

use sirup::cactus::{cactuses_up_to, check_focused, ucq_rewriting, Target};
use sirup::cq::OneCq;
use sirup::LabelledGraph;

fn main() -> sirup::Result<()> {
    // two incomparable T-leaves under the root, F below an R-edge
    let q = OneCq::new(&LabelledGraph::parse("R(r,x). F(x). R(r,t0). S(r,t1). T(t0). T(t1).")?)?;
    let en = cactuses_up_to(&q, 2, 1000)?;
    println!("{} cactuses of depth <= 2 (truncated: {})", en.cactuses.len(), en.truncated);
    for c in en.cactuses.iter().take(3) {
        println!("{}", c.skeleton_summary());
    }

    let ucq = ucq_rewriting(&q, 1, Target::Delta, 1000)?;
    println!("rewriting at depth 1 has {} disjuncts", ucq.disjuncts.len());
    let data = LabelledGraph::parse("R(a,b). F(b). R(a,c). S(a,d). T(c). T(d).")?;
    println!("holds on data: {}", ucq.holds(&data)?);

    let focus = check_focused(&q, 2, 1000)?;
    println!("focused up to depth 2: {}", focus.focused);
    Ok(())
}
