//! Prints `N_k`, `P_k`, `E_k` and the richness thresholds of the canonical
//! profile and of the scaled test profile.

use treeforce::GrowthProfile;

fn show(g: &GrowthProfile, k_max: u64) -> treeforce::Result<()> {
    println!("profile {}", g.id());
    for k in 0..=k_max {
        println!("  k={k}  N={}  P={}  E={}", g.seq_n(k)?, g.seq_p(k)?, g.seq_e(k)?);
    }
    for m in 0..=4 {
        let r = g.richness_threshold(m)?;
        println!("  m={m}  threshold={:?}  certified_from={:?}", r.threshold, r.certified_from);
    }
    Ok(())
}

fn main() -> treeforce::Result<()> {
    show(&GrowthProfile::canonical(), 5)?;
    show(&GrowthProfile::scaled_default(), 6)
}
