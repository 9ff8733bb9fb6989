//! Browser front end: step the planner tick by tick, toggle winner-takes-all, steer reach.

use drcplan::interp::propagation_distance;
use drcplan::planner::{
    decode_plan, default_channel_map, init_plan, run_planner, tick_plan, ChannelMap,
    MechanismGains, PlanGrid, PlannerEdits, RunOptions,
};
use drcplan::sokoban::{format_actions, generate_case_level, CaseKind, Level};
use wasm_bindgen::prelude::*;

const CHANNELS: usize = 32;

#[wasm_bindgen]
pub struct Demo {
    level: Level,
    map: ChannelMap,
    wta: bool,
    steer: f32,
    grid: PlanGrid,
    ticks: usize,
    events: Vec<String>,
}

#[wasm_bindgen]
impl Demo {
    /// Level from its text form.
    #[wasm_bindgen(constructor)]
    pub fn new(text: &str) -> Result<Demo, String> {
        let level = Level::parse(text).map_err(|e| e.to_string())?;
        let map = default_channel_map(CHANNELS).map_err(|e| e.to_string())?;
        let grid = init_plan(&level, &map, &MechanismGains::default());
        Ok(Demo {
            level,
            map,
            wta: true,
            steer: 1.0,
            grid,
            ticks: 0,
            events: Vec::new(),
        })
    }

    /// Case-study level by family name and size.
    pub fn case(kind: &str, size: usize) -> Result<Demo, String> {
        let k =
            CaseKind::from_name(kind).ok_or_else(|| format!("unknown level family {kind:?}"))?;
        let level = generate_case_level(k, size).map_err(|e| e.to_string())?;
        Demo::new(&level.to_string())
    }

    fn gains(&self) -> MechanismGains {
        let g = MechanismGains::default().steered(self.steer);
        if self.wta {
            g
        } else {
            g.without_wta()
        }
    }

    pub fn reset(&mut self) {
        self.grid = init_plan(&self.level, &self.map, &self.gains());
        self.ticks = 0;
        self.events.clear();
    }

    pub fn set_wta(&mut self, on: bool) {
        self.wta = on;
        self.reset();
    }

    pub fn set_steer(&mut self, factor: f32) {
        self.steer = factor;
        self.reset();
    }

    pub fn tick(&mut self) {
        let (next, events) = tick_plan(&self.grid, &self.level, &self.map, &self.gains());
        self.grid = next;
        self.ticks += 1;
        self.events = events.iter().map(|e| e.to_string()).collect();
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn width(&self) -> usize {
        self.level.width()
    }

    pub fn height(&self) -> usize {
        self.level.height()
    }

    pub fn level_text(&self) -> String {
        self.level.to_string()
    }

    /// Strongest box plan activation per square, row-major.
    pub fn heat(&self) -> Vec<f32> {
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let v = self
                    .map
                    .box_short
                    .iter()
                    .map(|&ch| self.grid.acts.get(r, c, ch))
                    .fold(f32::MIN, f32::max);
                out.push(v);
            }
        }
        out
    }

    /// Box plan directions at or above threshold per square, row-major, as bits in
    /// up, down, left, right order.
    pub fn directions(&self) -> Vec<u8> {
        let theta = self.gains().threshold;
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let bits = self
                    .map
                    .box_short
                    .iter()
                    .enumerate()
                    .filter(|&(_, &ch)| self.grid.acts.get(r, c, ch) >= theta);
                out.push(bits.fold(0u8, |m, (i, _)| m | 1 << i));
            }
        }
        out
    }

    /// Decoded plan, one character per square: arrows, upper case for long horizon.
    pub fn plan_text(&self) -> String {
        decode_plan(&self.grid, &self.map, self.gains().threshold).to_string()
    }

    /// Mechanism events of the last tick, one per line.
    pub fn events(&self) -> String {
        self.events.join("\n")
    }

    /// Closed-loop episode with the current settings: `solved,actions`.
    pub fn solve(&self) -> String {
        let ep = run_planner(
            &self.level,
            &self.map,
            &self.gains(),
            &RunOptions::default(),
            &PlannerEdits::default(),
        );
        format!("{},{}", ep.solved, format_actions(&ep.actions()))
    }
}

/// Longest plan chain on an open corridor under a steering factor.
#[wasm_bindgen]
pub fn reach(factor: f32, width: usize, ticks: usize) -> usize {
    let map = default_channel_map(CHANNELS).expect("channel count");
    propagation_distance(
        &MechanismGains::default().steered(factor),
        &map,
        width,
        ticks,
    )
}
