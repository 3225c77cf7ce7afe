//! Node kinematics on the periodic L x L square.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::Result;

/// Half-width of the uniform per-step turn angle.
pub const TURN_HALF_WIDTH: f64 = PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub pos: Point,
    /// Radians, kept in (-pi, pi].
    pub heading: f64,
}

/// Maps a coordinate onto [0, side).
#[inline]
pub fn wrap(coord: f64, side: f64) -> f64 {
    if (0.0..side).contains(&coord) {
        return coord;
    }
    let w = coord.rem_euclid(side);
    // rem_euclid can round a tiny negative input up to `side` itself.
    if w >= side {
        0.0
    } else {
        w
    }
}

#[inline]
pub fn reduce_angle(theta: f64) -> f64 {
    let mut t = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Minimum-image distance on the torus of side `side`.
#[inline]
pub fn toroidal_distance(a: Point, b: Point, side: f64) -> f64 {
    let dx = (a.x - b.x).abs();
    let dy = (a.y - b.y).abs();
    let dx = dx.min(side - dx);
    let dy = dy.min(side - dy);
    (dx * dx + dy * dy).sqrt()
}

/// Uniform positions in [0, L)^2 and headings in [-pi, pi).
pub fn init_world<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Vec<Kinematics>> {
    config.validate()?;
    let side = config.area_side;
    Ok((0..config.n_nodes)
        .map(|_| {
            let x = rng.gen_range(0.0..side);
            let y = rng.gen_range(0.0..side);
            let heading = rng.gen_range(-PI..PI);
            Kinematics {
                pos: Point::new(x, y),
                heading: reduce_angle(heading),
            }
        })
        .collect())
}

/// Advances every node by `speed` along its current heading, then turns it
/// by an independent uniform angle in [-pi/3, pi/3].
pub fn step_positions<R: Rng + ?Sized>(world: &mut [Kinematics], config: &SimConfig, rng: &mut R) {
    let side = config.area_side;
    let v = config.speed;
    for k in world.iter_mut() {
        let old = *k;
        let (sin, cos) = old.heading.sin_cos();
        k.pos.x = wrap(old.pos.x + v * cos, side);
        k.pos.y = wrap(old.pos.y + v * sin, side);
        let turn = rng.gen_range(-TURN_HALF_WIDTH..=TURN_HALF_WIDTH);
        k.heading = reduce_angle(old.heading + turn);
    }
}
