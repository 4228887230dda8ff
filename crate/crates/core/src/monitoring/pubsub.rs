use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Us,
    Bps,
    Watts,
    Bool,
    Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub t: SimTime,
    pub topic: String,
    pub value: f64,
    pub unit: Unit,
}

/// A producer's declaration of a topic and the unit its samples carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineAd {
    pub topic: String,
    pub producer: String,
    pub schema: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(usize);

#[derive(Debug)]
struct Subscription {
    topic: String,
    consumer: String,
    inbox: Vec<MetricSample>,
}

/// Synchronous in-loop broker. Samples are copied into each subscriber's
/// inbox at publish time; nothing is retained for topics nobody follows.
#[derive(Debug, Default)]
pub struct Broker {
    ads: BTreeMap<String, PipelineAd>,
    subs: Vec<Subscription>,
    by_topic: BTreeMap<String, Vec<usize>>,
    published: BTreeMap<String, u64>,
}

impl Broker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advertise(&mut self, ad: PipelineAd) -> Result<(), MonitorError> {
        if self.ads.contains_key(&ad.topic) {
            return Err(MonitorError::DuplicateTopic(ad.topic));
        }
        self.ads.insert(ad.topic.clone(), ad);
        Ok(())
    }

    pub fn is_advertised(&self, topic: &str) -> bool {
        self.ads.contains_key(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &PipelineAd> {
        self.ads.values()
    }

    pub fn subscribe(&mut self, topic: &str, consumer: &str) -> Result<SubscriptionId, MonitorError> {
        if !self.ads.contains_key(topic) {
            return Err(MonitorError::UnknownTopic(topic.to_string()));
        }
        let idx = self.subs.len();
        self.subs.push(Subscription {
            topic: topic.to_string(),
            consumer: consumer.to_string(),
            inbox: Vec::new(),
        });
        self.by_topic.entry(topic.to_string()).or_default().push(idx);
        Ok(SubscriptionId(idx))
    }

    /// Returns the number of subscribers the sample reached.
    pub fn publish(&mut self, sample: MetricSample) -> Result<usize, MonitorError> {
        let ad = self
            .ads
            .get(&sample.topic)
            .ok_or_else(|| MonitorError::UnknownTopic(sample.topic.clone()))?;
        if ad.schema != sample.unit {
            return Err(MonitorError::SchemaMismatch {
                topic: sample.topic.clone(),
                expected: ad.schema,
                got: sample.unit,
            });
        }
        *self.published.entry(sample.topic.clone()).or_default() += 1;
        let Some(targets) = self.by_topic.get(&sample.topic) else {
            return Ok(0);
        };
        for &i in targets {
            self.subs[i].inbox.push(sample.clone());
        }
        Ok(targets.len())
    }

    pub fn published_count(&self, topic: &str) -> u64 {
        self.published.get(topic).copied().unwrap_or(0)
    }

    pub fn pending(&self, id: SubscriptionId) -> &[MetricSample] {
        &self.subs[id.0].inbox
    }

    pub fn drain(&mut self, id: SubscriptionId) -> Vec<MetricSample> {
        std::mem::take(&mut self.subs[id.0].inbox)
    }

    pub fn consumer(&self, id: SubscriptionId) -> (&str, &str) {
        let s = &self.subs[id.0];
        (&s.topic, &s.consumer)
    }
}
