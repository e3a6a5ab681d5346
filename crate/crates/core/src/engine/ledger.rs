//! The engine's record of everything perception has claimed.

use serde::{Deserialize, Serialize};

use crate::fact::Fact;
use crate::geometry::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactStatus {
    Candidate,
    Confirmed,
    Refuted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub fact: Fact,
    /// Transcript step where the fact was first heard.
    pub source_step: u32,
    /// Drone pose at that step.
    pub source_pose: Pose,
    /// Captions that mentioned the fact.
    pub sightings: u32,
    pub status: FactStatus,
    pub votes_for: u32,
    pub votes_against: u32,
}

impl LedgerEntry {
    /// Applies the majority rule once all votes are in.
    pub fn settle(&mut self) {
        self.status = if self.votes_for > self.votes_against {
            FactStatus::Confirmed
        } else {
            FactStatus::Refuted
        };
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactLedger {
    entries: Vec<LedgerEntry>,
}

impl FactLedger {
    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn find(&self, fact: &Fact) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| &e.fact == fact)
    }

    pub fn find_mut(&mut self, fact: &Fact) -> Option<&mut LedgerEntry> {
        self.entries.iter_mut().find(|e| &e.fact == fact)
    }

    /// Records one caption's facts; returns the facts not seen before.
    pub fn merge(&mut self, facts: &[Fact], step: u32, pose: Pose) -> Vec<Fact> {
        let mut fresh = Vec::new();
        for fact in facts {
            match self.find_mut(fact) {
                Some(e) => e.sightings += 1,
                None => {
                    self.entries.push(LedgerEntry {
                        fact: fact.clone(),
                        source_step: step,
                        source_pose: pose,
                        sightings: 1,
                        status: FactStatus::Candidate,
                        votes_for: 0,
                        votes_against: 0,
                    });
                    fresh.push(fact.clone());
                }
            }
        }
        fresh
    }

    /// Inserts a fact with no sightings (a target the controller named
    /// without perception having reported it).
    pub fn ensure(&mut self, fact: &Fact, step: u32, pose: Pose) -> &mut LedgerEntry {
        if let Some(i) = self.entries.iter().position(|e| &e.fact == fact) {
            return &mut self.entries[i];
        }
        self.entries.push(LedgerEntry {
            fact: fact.clone(),
            source_step: step,
            source_pose: pose,
            sightings: 0,
            status: FactStatus::Candidate,
            votes_for: 0,
            votes_against: 0,
        });
        self.entries.last_mut().expect("just pushed")
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut LedgerEntry> {
        self.entries.iter_mut()
    }

    pub fn with_status(&self, status: FactStatus) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(move |e| e.status == status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn merge_counts_sightings_and_reports_new_facts() {
        let mut l = FactLedger::default();
        let pose = Pose::new(Vec3::ZERO, 0.0);
        let tree = Fact::present("tree", &[]);
        let fire = Fact::present("fire", &[]);
        assert_eq!(l.merge(std::slice::from_ref(&tree), 0, pose), vec![tree.clone()]);
        assert_eq!(l.merge(&[tree.clone(), fire.clone()], 1, pose), vec![fire.clone()]);
        assert_eq!(l.find(&tree).unwrap().sightings, 2);
        assert_eq!(l.find(&fire).unwrap().source_step, 1);
    }

    #[test]
    fn ties_settle_as_refuted() {
        let mut l = FactLedger::default();
        let e = l.ensure(&Fact::present("tree", &[]), 0, Pose::new(Vec3::ZERO, 0.0));
        e.votes_for = 2;
        e.votes_against = 2;
        e.settle();
        assert_eq!(e.status, FactStatus::Refuted);
    }
}
