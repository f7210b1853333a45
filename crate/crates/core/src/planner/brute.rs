use crate::error::Result;
use crate::sim::{RepositionAction, SimState, Step};
use std::collections::HashMap;

fn shortage(s: &SimState) -> i64 {
    s.shortage_by_port_day().iter().flatten().sum()
}

fn search(s: &mut SimState, memo: &mut HashMap<Vec<i64>, i64>) -> Result<i64> {
    let before = shortage(s);
    match s.next_decision()? {
        Step::End => Ok(shortage(s) - before),
        Step::Decision(d) => {
            let so_far = shortage(s) - before;
            let key = s.state_key();
            if let Some(&v) = memo.get(&key) {
                return Ok(so_far + v);
            }
            let mut best = i64::MAX;
            for delta in d.feasible.0..=d.feasible.1 {
                let mut c = s.clone();
                c.apply_action(&d, RepositionAction::new(delta))?;
                best = best.min(search(&mut c, memo)?);
            }
            memo.insert(key, best);
            Ok(so_far + best)
        }
    }
}

/// Least total shortage any repositioning can reach from `state`, by
/// trying every feasible action at every call. Exponential; only for
/// worlds without randomness in travel times and orders, and tiny ones.
pub fn brute_force_min_shortage(state: &SimState) -> Result<i64> {
    let mut s = state.clone();
    let before = shortage(&s);
    Ok(before + search(&mut s, &mut HashMap::new())?)
}
