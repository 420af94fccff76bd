#![allow(dead_code)]

use dnb_psm::rng::Substream;

/// Exhaustive reference for greedy caliper matching.
///
/// Enumerates every injective assignment of treated subjects to controls
/// within `width` (a treated subject may stay unmatched) and returns the
/// lexicographically smallest one, where treated subjects are ranked by
/// descending score (ties: lower index first) and each choice is keyed by
/// (distance, control index), with "unmatched" ranked after every control.
/// That minimum is exactly what the greedy rule produces.
pub fn exhaustive_greedy(scores: &[f64], x: &[bool], width: f64) -> Vec<(usize, usize)> {
    let mut treated: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
    let controls: Vec<usize> = (0..x.len()).filter(|&i| !x[i]).collect();
    // insertion sort keeps this independent of the library's sort call
    for i in 1..treated.len() {
        let mut j = i;
        while j > 0 && {
            let (a, b) = (treated[j - 1], treated[j]);
            scores[b] > scores[a] || (scores[b] == scores[a] && b < a)
        } {
            treated.swap(j - 1, j);
            j -= 1;
        }
    }

    type Key = Vec<(f64, usize)>;
    let mut best: Option<(Key, Vec<(usize, usize)>)> = None;
    let mut used = vec![false; controls.len()];
    let mut key = Vec::new();
    let mut pairs = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        depth: usize,
        treated: &[usize],
        controls: &[usize],
        scores: &[f64],
        width: f64,
        used: &mut Vec<bool>,
        key: &mut Vec<(f64, usize)>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut Option<(Vec<(f64, usize)>, Vec<(usize, usize)>)>,
    ) {
        if depth == treated.len() {
            let better = match best {
                None => true,
                Some((k, _)) => {
                    let mut ord = std::cmp::Ordering::Equal;
                    for (a, b) in key.iter().zip(k.iter()) {
                        ord = a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                        if ord != std::cmp::Ordering::Equal {
                            break;
                        }
                    }
                    ord == std::cmp::Ordering::Less
                }
            };
            if better {
                *best = Some((key.clone(), pairs.clone()));
            }
            return;
        }
        let t = treated[depth];
        for (slot, &c) in controls.iter().enumerate() {
            let gap = (scores[t] - scores[c]).abs();
            if used[slot] || gap > width {
                continue;
            }
            used[slot] = true;
            key.push((gap, c));
            pairs.push((t, c));
            recurse(depth + 1, treated, controls, scores, width, used, key, pairs, best);
            pairs.pop();
            key.pop();
            used[slot] = false;
        }
        key.push((f64::INFINITY, usize::MAX));
        recurse(depth + 1, treated, controls, scores, width, used, key, pairs, best);
        key.pop();
    }

    recurse(0, &treated, &controls, scores, width, &mut used, &mut key, &mut pairs, &mut best);
    best.map(|(_, p)| p).unwrap_or_default()
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Random matching instance with 2..=8 subjects, both groups nonempty.
/// Every fourth instance rounds scores to one decimal to force ties.
pub fn random_instance(stream: &mut Substream, k: usize) -> (Vec<f64>, Vec<bool>, f64) {
    loop {
        let n = 2 + (stream.next_uniform() * 7.0) as usize;
        let mut scores: Vec<f64> = (0..n).map(|_| 0.01 + 0.98 * stream.next_uniform()).collect();
        if k % 4 == 0 {
            for s in &mut scores {
                *s = ((*s * 10.0).round() / 10.0).clamp(0.1, 0.9);
            }
        }
        let x: Vec<bool> = (0..n).map(|_| stream.next_uniform() < 0.5).collect();
        let mult = 0.05 + 2.95 * stream.next_uniform();
        if x.iter().any(|t| *t) && x.iter().any(|t| !*t) {
            return (scores, x, mult);
        }
    }
}
