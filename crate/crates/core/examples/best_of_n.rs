//! Plain versus finding-group weighted Best-of-N selection.

use radprm::selection::{bon_select, group_candidates, weighted_bon};

fn main() -> radprm::Result<()> {
    let scores = [0.9, 0.8, 0.95];
    let vectors = vec![vec![1, 0], vec![1, 0], vec![0, 1]];
    for g in group_candidates(&scores, &vectors)? {
        println!("group {:?}: members {:?}, total {:.2}", g.finding_vector, g.members, g.total_score);
    }
    println!("plain BoN picks {}", bon_select(&scores)?);
    println!("weighted BoN picks {}", weighted_bon(&scores, &vectors)?);
    Ok(())
}
