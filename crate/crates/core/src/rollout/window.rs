use crate::sim::OBS_DIM;

use super::buffer::{EpisodeEnd, RolloutBuffer};

/// An `(n + 1)`-state window anchored at one buffer step, the input/label
/// pair of the validation network. Observations are referenced by buffer
/// row; near an episode end the last row repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryWindow {
    pub anchor: usize,
    pub rows: Vec<usize>,
    pub feasible: bool,
    pub padded: bool,
    pub old_log_prob: f64,
}

impl TrajectoryWindow {
    /// Writes the flattened `(n + 1) * OBS_DIM` input into `out`.
    pub fn gather_into(&self, buffer: &RolloutBuffer, out: &mut Vec<f64>) {
        for &r in &self.rows {
            out.extend_from_slice(buffer.observation(r));
        }
    }

    pub fn flatten(&self, buffer: &RolloutBuffer) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len() * OBS_DIM);
        self.gather_into(buffer, &mut out);
        out
    }
}

/// One window per buffer step. A window is infeasible when any step it
/// covers has positive cost, or when it runs past an episode that ended by
/// leaving the road.
pub fn extract_windows(buffer: &RolloutBuffer, n: usize) -> Vec<TrajectoryWindow> {
    assert!(n >= 1, "window length must be at least 1");
    let mut out = Vec::with_capacity(buffer.len());
    for (start, end) in buffer.episode_ranges() {
        let crashed = buffer.ends[end - 1] == EpisodeEnd::Departure;
        for t in start..end {
            let last_real = (t + n).min(end - 1);
            let padded = t + n > end - 1;
            let rows = (t..=t + n).map(|j| j.min(end - 1)).collect();
            let hit = buffer.costs[t..=last_real].iter().any(|&c| c > 0.0);
            out.push(TrajectoryWindow {
                anchor: t,
                rows,
                feasible: !(hit || (padded && crashed)),
                padded,
                old_log_prob: buffer.log_probs[t],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::buffer::Transition;

    fn episode(buf: &mut RolloutBuffer, costs: &[f64], end: EpisodeEnd) {
        for (i, &c) in costs.iter().enumerate() {
            let obs = [buf.len() as f64; OBS_DIM];
            buf.push(Transition {
                observation: &obs,
                raw_action: &[0.0, 0.0],
                action: &[0.0, 0.0],
                log_prob: -(buf.len() as f64),
                reward: 0.0,
                cost: c,
                value: 0.0,
                cost_value: 0.0,
                feasible: c == 0.0,
                episode_start: i == 0,
            });
        }
        buf.end_episode(end, (0.0, 0.0));
    }

    #[test]
    fn safe_episode_pads_and_stays_feasible() {
        let mut buf = RolloutBuffer::default();
        episode(&mut buf, &[0.0; 7], EpisodeEnd::Success);
        let w = extract_windows(&buf, 5);
        assert_eq!(w.len(), 7);
        assert!(w.iter().all(|w| w.feasible && w.rows.len() == 6));
        assert_eq!(w.iter().filter(|w| w.padded).count(), 5);
        assert_eq!(w[6].rows, vec![6; 6]);
        assert_eq!(w[1].rows, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(w[3].old_log_prob, -3.0);
        assert_eq!(w[0].flatten(&buf).len(), 294);
    }

    #[test]
    fn departure_labels_last_six_anchors() {
        let mut buf = RolloutBuffer::default();
        let mut costs = vec![0.0; 12];
        costs[11] = 1.0;
        episode(&mut buf, &costs, EpisodeEnd::Departure);
        let w = extract_windows(&buf, 5);
        let bad: Vec<usize> = w.iter().filter(|w| !w.feasible).map(|w| w.anchor).collect();
        assert_eq!(bad, (6..=11).collect::<Vec<_>>());
    }

    #[test]
    fn windows_never_cross_episodes() {
        let mut buf = RolloutBuffer::default();
        episode(&mut buf, &[0.0; 4], EpisodeEnd::MaxSteps);
        episode(&mut buf, &[0.0, 1.0, 0.0], EpisodeEnd::Cut);
        let w = extract_windows(&buf, 5);
        assert_eq!(w.len(), buf.len());
        for win in &w[..4] {
            assert!(win.rows.iter().all(|&r| r < 4));
            assert!(win.feasible);
        }
        for win in &w[4..] {
            assert!(win.rows.iter().all(|&r| (4..7).contains(&r)));
        }
        assert!(!w[4].feasible && !w[5].feasible && w[6].feasible);
    }
}
