//! Compiles a formula into a gadget query and compares triggering with the
//! gathering oracle on every cactus of depth at most 2.

use sirup::gadget::{verify_case, Formula, Frame};

fn main() -> sirup::Result<()> {
    let f = Formula::parse("inputs: up 1, down 1\nformula: and(y1, not(y2))\n")?;
    println!("formula {} with {} gates", f.root, f.gate_count());
    for frame in [Frame::AA, Frame::AT, Frame::TA] {
        let r = verify_case(&[(f.clone(), frame)], 2, 1000)?;
        println!(
            "{frame:?}: {} query nodes, {} cactuses, {} checks, {} triggered, {} violations",
            r.query_nodes,
            r.cactuses,
            r.checks,
            r.triggered,
            r.violations.len()
        );
    }
    Ok(())
}
