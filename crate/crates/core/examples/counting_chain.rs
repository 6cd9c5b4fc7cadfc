//! The inequality chain bounding the number of tuples below a level.

use treeforce::rigidity::counting_chain;
use treeforce::GrowthProfile;

fn main() -> treeforce::Result<()> {
    let g = GrowthProfile::canonical();
    for (a, m) in [(vec![2, 3], 4), (vec![0, 1, 2], 3), (vec![1, 3, 4], 5)] {
        let c = counting_chain(&g, &a, m)?;
        println!("A={a:?} m={m} k={:?} product={}", c.k, c.product.brief(60));
        for l in &c.links {
            let op = if l.strict { "<" } else { "<=" };
            println!("   {}: {} {op} {}  [{}]", l.claim, l.lhs.brief(60), l.rhs.brief(60), l.holds);
        }
    }
    Ok(())
}
