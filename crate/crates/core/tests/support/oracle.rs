// Naive per-pixel reference of the frame formulas, written independently of
// the streaming renderer: events are grouped in a hash map keyed by
// (binned x, binned y, polarity) and every value is evaluated in f64 straight
// from its definition.
#![allow(dead_code)]

use std::collections::HashMap;

use evframe::{Event, Polarity, Representation, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Reference {
    pub width: usize,
    pub height: usize,
    pub ec: [Vec<f64>; 2],
    pub lnes: [Vec<f64>; 2],
    pub lnec: [Vec<f64>; 2],
}

fn pol(p: Polarity) -> usize {
    match p {
        Polarity::Pos => 0,
        Polarity::Neg => 1,
    }
}

pub fn reference(events: &[Event], input: SensorGeometry, output: SensorGeometry) -> Reference {
    let (w, h) = (output.width as usize, output.height as usize);
    let mut groups: HashMap<(usize, usize, usize), Vec<u64>> = HashMap::new();
    for e in events {
        let bx = e.x as u64 * output.width as u64 / input.width as u64;
        let by = e.y as u64 * output.height as u64 / input.height as u64;
        groups
            .entry((bx as usize, by as usize, pol(e.p)))
            .or_default()
            .push(e.t);
    }
    let t_min = events.iter().map(|e| e.t).min().unwrap_or(0);
    let t_max = events.iter().map(|e| e.t).max().unwrap_or(0);
    let max_count = groups.values().map(Vec::len).max().unwrap_or(0);

    let mut ec = [vec![0.0; w * h], vec![0.0; w * h]];
    let mut lnes = ec.clone();
    let mut lnec = ec.clone();
    for (&(x, y, p), ts) in &groups {
        let i = y * w + x;
        ec[p][i] = ts.len() as f64;
        let latest = *ts.iter().max().unwrap();
        lnes[p][i] = if t_max == t_min {
            1.0
        } else {
            (latest - t_min) as f64 / (t_max - t_min) as f64
        };
        lnec[p][i] = ts.len() as f64 / max_count as f64;
    }
    Reference {
        width: w,
        height: h,
        ec,
        lnes,
        lnec,
    }
}

impl Reference {
    /// Flattened channel-major values in the channel order of `rep`.
    pub fn flatten(&self, rep: Representation) -> Vec<f64> {
        let planes: Vec<Vec<f64>> = match rep {
            Representation::Ec => self.ec.to_vec(),
            Representation::Lnes => self.lnes.to_vec(),
            Representation::Lnec => self.lnec.to_vec(),
            Representation::Lnecs => vec![
                self.lnes[0].clone(),
                self.lnes[1].clone(),
                self.lnec[0].clone(),
                self.lnec[1].clone(),
            ],
            Representation::Lnewcs => (0..2)
                .map(|p| self.lnes[p].iter().zip(&self.lnec[p]).map(|(a, b)| a * b).collect())
                .collect(),
        };
        planes.concat()
    }
}

/// Largest absolute difference between a rendered frame and the reference.
pub fn max_abs_diff(rendered: &[f32], reference: &[f64]) -> f64 {
    assert_eq!(rendered.len(), reference.len());
    rendered
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max)
}

/// A random sorted event list together with input and output geometries.
pub struct RandomSegment {
    pub events: Vec<Event>,
    pub input: SensorGeometry,
    pub output: SensorGeometry,
}

/// Seeded random segments covering clustered timestamps, duplicate times,
/// single-timestamp segments, tiny sensors and 1280x800 to 240x150 binning.
pub fn random_segment(seed: u64, max_events: usize) -> RandomSegment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, output) = match seed % 4 {
        0 => ((1280, 800), (240, 150)),
        1 => ((240, 150), (240, 150)),
        2 => {
            let (w, h) = (rng.random_range(1..=64u16), rng.random_range(1..=64u16));
            ((w, h), (rng.random_range(1..=w), rng.random_range(1..=h)))
        }
        _ => ((346, 260), (173, 130)),
    };
    let n = if seed % 10 == 7 {
        0
    } else {
        rng.random_range(1..=max_events)
    };
    let span: u64 = match seed % 5 {
        0 => 0,
        1 => rng.random_range(1..50),
        _ => rng.random_range(1..10_000_000),
    };
    let t0: u64 = rng.random_range(0..1_000_000_000);
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let t = t0 + if span == 0 { 0 } else { rng.random_range(0..=span) };
            let p = if rng.random_bool(0.5) {
                Polarity::Pos
            } else {
                Polarity::Neg
            };
            Event::new(t, rng.random_range(0..input.0), rng.random_range(0..input.1), p)
        })
        .collect();
    events.sort_by_key(|e| e.t);
    RandomSegment {
        events,
        input: SensorGeometry::new(input.0, input.1).unwrap(),
        output: SensorGeometry::new(output.0, output.1).unwrap(),
    }
}
