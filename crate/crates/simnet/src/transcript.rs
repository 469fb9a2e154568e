//! Newline-delimited JSON run log.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub pk: String,
    pub roles: Vec<String>,
    pub behavior: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub name: String,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxState {
    pub content: String,
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFinal {
    pub name: String,
    pub honest: bool,
    pub chain_valid: bool,
    pub height: usize,
    pub head: String,
    /// Digest over every block's Merkle root, in order.
    pub roots: String,
    /// Digest over every transaction's full encoding.
    pub state: String,
    pub epoch: Option<u64>,
    pub txs: BTreeMap<String, TxState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Setup {
        scenario: String,
        seed: u64,
        nodes: Vec<NodeInfo>,
    },
    Message {
        slot: u64,
        from: String,
        to: String,
        kind: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        label: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        detail: Option<String>,
    },
    Verdict {
        slot: u64,
        node: String,
        request: String,
        stage: String,
        verdict: String,
    },
    Event {
        slot: u64,
        node: String,
        event: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        label: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        detail: Option<String>,
    },
    Group {
        slot: u64,
        epoch: u64,
        window: [u64; 2],
        members: Vec<MemberInfo>,
        collector: String,
        total_weight: u64,
        ts_abs: u64,
    },
    Balances {
        slot: u64,
        balances: BTreeMap<String, u64>,
        deposits: u64,
        escrow: u64,
        burned: u64,
        total: u64,
        minted: u64,
    },
    Final {
        slot: u64,
        nodes: Vec<NodeFinal>,
        requests: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<Record>,
}

impl Transcript {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn final_record(&self) -> Option<(&[NodeFinal], &BTreeMap<String, String>)> {
        self.records.iter().rev().find_map(|r| match r {
            Record::Final { nodes, requests, .. } => Some((nodes.as_slice(), requests)),
            _ => None,
        })
    }

    pub fn events<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| matches!(r, Record::Event { event, .. } if event == name))
    }
}
