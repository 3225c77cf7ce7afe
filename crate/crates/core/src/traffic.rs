//! Packet generation, probabilistic next-hop routing, capacity-limited FIFO
//! delivery and energy accounting.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{RoutingRule, SimConfig};
use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::metrics::{congested_count, HopLog, StepRecord};
use crate::rng::{substream, SimRng, Stream};
use crate::world::{init_world, step_positions, toroidal_distance, Kinematics, Point};

/// Fraction of the area side used as the floor for a neighbor's distance to
/// the destination.
pub const DISTANCE_CLAMP_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub src: u32,
    pub dst: u32,
    pub born_at: u64,
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub kinematics: Kinematics,
    pub energy: f64,
    pub queue: VecDeque<Packet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeliveryStats {
    /// One-hop transfers, final hops included.
    pub forwarded: u64,
    pub arrived: u64,
    pub generated: u64,
    pub energy_spent: f64,
}

/// Unnormalized next-hop weight `E^(1-alpha) * l^(-alpha)`.
#[inline]
fn weight(energy: f64, dist: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        energy
    } else if alpha == 1.0 {
        1.0 / dist
    } else if alpha == 0.5 {
        (energy / dist).sqrt()
    } else {
        energy.powf(1.0 - alpha) * dist.powf(-alpha)
    }
}

/// Index into `neighbors` of the largest next-hop weight, ties broken
/// uniformly at random. `None` when every weight is zero.
///
/// Compares a monotone transform of the weight computed from squared
/// distances, so no square root is taken on this hot path.
fn most_probable<R: Rng + ?Sized>(
    neighbors: &[usize],
    nodes: &[NodeState],
    positions: &[Point],
    target: Point,
    config: &SimConfig,
    clamp: f64,
    rng: &mut R,
) -> Option<usize> {
    let alpha = config.alpha;
    let side = config.area_side;
    let clamp2 = clamp * clamp;
    let mut best = 0.0f64;
    let mut pick = None;
    let mut ties = 0u32;
    for (i, &j) in neighbors.iter().enumerate() {
        let l2 = squared_toroidal_distance(positions[j], target, side).max(clamp2);
        let e = nodes[j].energy;
        let key = if alpha == 0.0 {
            e
        } else if alpha == 1.0 {
            1.0 / l2
        } else if alpha == 0.5 {
            e * e / l2
        } else {
            e.powf(1.0 - alpha) * l2.powf(-0.5 * alpha)
        };
        if key > best {
            best = key;
            pick = Some(i);
            ties = 1;
        } else if key == best && pick.is_some() {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                pick = Some(i);
            }
        }
    }
    pick
}

#[inline]
fn squared_toroidal_distance(a: Point, b: Point, side: f64) -> f64 {
    let dx = (a.x - b.x).abs();
    let dy = (a.y - b.y).abs();
    let dx = dx.min(side - dx);
    let dy = dy.min(side - dy);
    dx * dx + dy * dy
}

/// Next-hop distribution over `energies.len()` neighbors.
///
/// Neighbor `i` gets probability proportional to
/// `(E_i / sum E)^(1-alpha) / (l_i / sum l)^alpha`, i.e. to
/// `E_i^(1-alpha) * l_i^(-alpha)`. Distances should already be clamped away
/// from zero.
pub fn routing_weights(energies: &[f64], distances_to_dst: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if energies.is_empty() {
        return Err(Error::NoNeighbors);
    }
    if energies.len() != distances_to_dst.len() {
        return Err(Error::Usage(format!(
            "{} energies but {} distances",
            energies.len(),
            distances_to_dst.len()
        )));
    }
    let mut w: Vec<f64> = energies
        .iter()
        .zip(distances_to_dst)
        .map(|(&e, &l)| weight(e, l, alpha))
        .collect();
    let total: f64 = w.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(Error::Domain(format!("next-hop weights sum to {total}")));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Appends `floor(rho) + Bernoulli(frac(rho))` packets to every queue, each
/// with a destination drawn uniformly from the other nodes.
pub fn generate_packets<R: Rng + ?Sized>(
    nodes: &mut [NodeState],
    config: &SimConfig,
    rng: &mut R,
    now: u64,
    next_id: &mut u64,
) -> u64 {
    let n = nodes.len();
    let whole = config.gen_rate.floor();
    let frac = config.gen_rate - whole;
    let whole = whole as u64;
    let mut total = 0;
    for (src, node) in nodes.iter_mut().enumerate() {
        let mut k = whole;
        if frac > 0.0 && rng.gen_bool(frac) {
            k += 1;
        }
        for _ in 0..k {
            let mut dst = rng.gen_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            node.queue.push_back(Packet {
                id: *next_id,
                src: src as u32,
                dst: dst as u32,
                born_at: now,
                hops: 0,
            });
            *next_id += 1;
        }
        total += k;
    }
    total
}

/// True once some node can no longer pay for a single hop.
pub fn is_dead(nodes: &[NodeState], config: &SimConfig) -> bool {
    nodes.iter().any(|n| n.energy < config.hop_cost)
}

/// Runs the delivery phase for one step.
///
/// Nodes act in a fresh random order. Each sends at most `C` packets from
/// the head of its queue, never more than its energy pays for and never a
/// packet that arrived during this same phase. Senders pay `hop_cost` per
/// transfer. A packet whose destination is in range is delivered; otherwise
/// it goes to the neighbor chosen by `config.routing` from the next-hop
/// weights, read with energies as they stand when the packet is sent. Arrived packets have their hop count appended to `hop_log`.
pub fn deliver_step<R: Rng + ?Sized>(
    nodes: &mut [NodeState],
    index: &GridIndex,
    positions: &[Point],
    config: &SimConfig,
    rng: &mut R,
    hop_log: &mut HopLog,
    scratch: &mut DeliveryScratch,
) -> DeliveryStats {
    let n = nodes.len();
    let mut stats = DeliveryStats::default();
    let side = config.area_side;
    let radius = config.comm_radius;
    let clamp = DISTANCE_CLAMP_FRACTION * side;

    scratch.order.clear();
    scratch.order.extend(0..n);
    scratch.order.shuffle(rng);
    scratch.eligible.clear();
    scratch.eligible.extend(nodes.iter().map(|s| s.queue.len()));

    for oi in 0..n {
        let s = scratch.order[oi];
        let budget = scratch.eligible[s].min(config.capacity as usize);
        if budget == 0 || nodes[s].energy < config.hop_cost {
            continue;
        }
        let here = positions[s];
        // Neighbors are looked up only once a packet needs relaying.
        let mut looked_up = false;
        for _ in 0..budget {
            if nodes[s].energy < config.hop_cost {
                break;
            }
            let dst = nodes[s].queue.front().expect("eligible packets are queued").dst as usize;
            let direct = toroidal_distance(here, positions[dst], side) <= radius;
            if !direct && !looked_up {
                index
                    .neighbors_into(s, positions, &mut scratch.neighbors)
                    .expect("index built from the same snapshot");
                looked_up = true;
            }
            if !direct && scratch.neighbors.is_empty() {
                break;
            }
            let mut packet = nodes[s].queue.pop_front().expect("eligible packets are queued");
            packet.hops += 1;
            if direct {
                nodes[s].energy -= config.hop_cost;
                stats.forwarded += 1;
                stats.arrived += 1;
                stats.energy_spent += config.hop_cost;
                hop_log.record(packet.hops);
                continue;
            }
            let target = positions[dst];
            let pick = match config.routing {
                RoutingRule::MostProbable => {
                    most_probable(&scratch.neighbors, nodes, positions, target, config, clamp, rng)
                }
                RoutingRule::Sample => {
                    scratch.weights.clear();
                    let mut total = 0.0;
                    for &j in &scratch.neighbors {
                        let l = toroidal_distance(positions[j], target, side).max(clamp);
                        total += weight(nodes[j].energy, l, config.alpha);
                        scratch.weights.push(total);
                    }
                    (total > 0.0).then(|| {
                        let u = rng.gen::<f64>() * total;
                        scratch
                            .weights
                            .iter()
                            .position(|&c| u < c)
                            .unwrap_or(scratch.weights.len() - 1)
                    })
                }
            };
            let Some(pick) = pick else {
                // Every neighbor is out of energy; the network dies this step.
                packet.hops -= 1;
                nodes[s].queue.push_front(packet);
                break;
            };
            let next = scratch.neighbors[pick];
            nodes[s].energy -= config.hop_cost;
            stats.forwarded += 1;
            stats.energy_spent += config.hop_cost;
            nodes[next].queue.push_back(packet);
        }
    }
    stats
}

/// Buffers reused across delivery phases.
#[derive(Debug, Default, Clone)]
pub struct DeliveryScratch {
    order: Vec<usize>,
    eligible: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

/// Cumulative counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub generated: u64,
    pub forwarded: u64,
    pub arrived: u64,
}

/// One network evolving step by step until its first node dies.
#[derive(Debug, Clone)]
pub struct Network {
    config: SimConfig,
    nodes: Vec<NodeState>,
    positions: Vec<Point>,
    index: GridIndex,
    motion_rng: SimRng,
    traffic_rng: SimRng,
    now: u64,
    next_packet_id: u64,
    totals: Totals,
    hop_log: HopLog,
    scratch: DeliveryScratch,
    dead: bool,
}

impl Network {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let world = init_world(config, &mut substream(config.seed, Stream::Init))?;
        let nodes: Vec<NodeState> = world
            .into_iter()
            .map(|kinematics| NodeState {
                kinematics,
                energy: config.init_energy,
                queue: VecDeque::new(),
            })
            .collect();
        let positions: Vec<Point> = nodes.iter().map(|n| n.kinematics.pos).collect();
        let index = GridIndex::from_config(&positions, config, 0);
        let dead = is_dead(&nodes, config);
        Ok(Self {
            config: config.clone(),
            nodes,
            positions,
            index,
            motion_rng: substream(config.seed, Stream::Motion),
            traffic_rng: substream(config.seed, Stream::Traffic),
            now: 0,
            next_packet_id: 0,
            totals: Totals::default(),
            hop_log: HopLog::default(),
            scratch: DeliveryScratch::default(),
            dead,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn hop_log(&self) -> &HopLog {
        &self.hop_log
    }

    pub fn into_hop_log(self) -> HopLog {
        self.hop_log
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    pub fn queued(&self) -> u64 {
        self.nodes.iter().map(|n| n.queue.len() as u64).sum()
    }

    /// Observables of the current state, with `n_c` supplied by the caller.
    fn snapshot(&self, n_c: usize, stats: DeliveryStats) -> StepRecord {
        let mut e_total = 0.0;
        let mut e_max = f64::NEG_INFINITY;
        let mut e_min = f64::INFINITY;
        for n in &self.nodes {
            e_total += n.energy;
            e_max = e_max.max(n.energy);
            e_min = e_min.min(n.energy);
        }
        StepRecord {
            t: self.now,
            s: self.queued(),
            n_c: n_c as u64,
            e_total,
            e_max,
            e_min,
            generated: stats.generated,
            forwarded: stats.forwarded,
            arrived: stats.arrived,
        }
    }

    /// The record for time 0, before any motion or traffic.
    pub fn initial_record(&self) -> StepRecord {
        self.snapshot(0, DeliveryStats::default())
    }

    /// Advances one step: move, re-index, generate, deliver, record, check
    /// for death.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.dead {
            return Err(Error::NetworkDead(self.now));
        }
        self.now += 1;

        let mut world: Vec<Kinematics> = self.nodes.iter().map(|n| n.kinematics).collect();
        step_positions(&mut world, &self.config, &mut self.motion_rng);
        for ((node, k), p) in self.nodes.iter_mut().zip(world).zip(self.positions.iter_mut()) {
            node.kinematics = k;
            *p = k.pos;
        }

        self.index = GridIndex::from_config(&self.positions, &self.config, self.now);

        let generated = generate_packets(
            &mut self.nodes,
            &self.config,
            &mut self.traffic_rng,
            self.now,
            &mut self.next_packet_id,
        );
        let n_c = congested_count(&self.nodes, &self.config);

        let mut stats = deliver_step(
            &mut self.nodes,
            &self.index,
            &self.positions,
            &self.config,
            &mut self.traffic_rng,
            &mut self.hop_log,
            &mut self.scratch,
        );
        stats.generated = generated;
        self.totals.generated += generated;
        self.totals.forwarded += stats.forwarded;
        self.totals.arrived += stats.arrived;

        let record = self.snapshot(n_c, stats);
        self.dead = is_dead(&self.nodes, &self.config);
        Ok(record)
    }
}
