//! Breadth-first indices on the master tree and their inverse.

use treeforce::{GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = GrowthProfile::canonical();
    for l in 0..=4 {
        println!("level {l}: offset {}  width {}", g.level_offset(l)?.brief(60), g.level_width(l)?.brief(60));
    }
    for k in [0u64, 1, 2, 3, 4, 7, 8, 100, 263] {
        let p = g.path_of(k)?;
        let back = g.ind_u64(&p)?;
        println!("path_of({k}) = {p}  ind = {back}");
        assert_eq!(back, k);
    }
    let deep = NodePath(vec![0, 1, 255, 12345]);
    println!("ind({deep}) = {}", g.ind(&deep)?.value().brief(120));
    Ok(())
}
