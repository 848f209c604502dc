use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::FloorPlan;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query text is empty")]
    Empty,
    #[error("target room `{0}` is not in the plan")]
    UnknownRoom(String),
    #[error("target object `{0}` is not in the plan")]
    UnknownObject(String),
    #[error("object `{object}` is in `{actual}`, not `{room}`")]
    ObjectElsewhere { object: String, room: String, actual: String },
    #[error("cannot infer a target room from `{0}`")]
    NoTarget(String),
}

/// A navigation instruction with its ground-truth goal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub target_room: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object: Option<String>,
}

impl Query {
    pub fn new(text: impl Into<String>, target_room: impl Into<String>, target_object: Option<String>) -> Self {
        Query {
            text: text.into(),
            target_room: target_room.into(),
            target_object,
        }
    }

    pub fn validate(&self, plan: &FloorPlan) -> Result<(), QueryError> {
        if self.text.trim().is_empty() {
            return Err(QueryError::Empty);
        }
        if plan.room(&self.target_room).is_none() {
            return Err(QueryError::UnknownRoom(self.target_room.clone()));
        }
        if let Some(id) = &self.target_object {
            let obj = plan
                .object(id)
                .ok_or_else(|| QueryError::UnknownObject(id.clone()))?;
            if obj.room != self.target_room {
                return Err(QueryError::ObjectElsewhere {
                    object: id.clone(),
                    room: self.target_room.clone(),
                    actual: obj.room.clone(),
                });
            }
        }
        Ok(())
    }

    /// Builds a query from free text by matching object labels first, then
    /// room labels and aliases (longest match wins).
    pub fn infer(plan: &FloorPlan, text: &str) -> Result<Query, QueryError> {
        if text.trim().is_empty() {
            return Err(QueryError::Empty);
        }
        let lower = text.to_lowercase();
        let longest = |names: Vec<(&str, String)>| {
            names
                .into_iter()
                .filter(|(_, n)| !n.is_empty() && lower.contains(n.as_str()))
                .max_by_key(|(_, n)| n.len())
                .map(|(id, _)| id.to_string())
        };
        let object = longest(
            plan.objects
                .iter()
                .flat_map(|o| [(o.id.as_str(), o.label.to_lowercase()), (o.id.as_str(), o.id.replace('_', " "))])
                .collect(),
        );
        if let Some(obj) = object {
            let room = plan.object(&obj).expect("matched object exists").room.clone();
            return Ok(Query::new(text, room, Some(obj)));
        }
        let room = longest(
            plan.rooms
                .iter()
                .flat_map(|r| {
                    std::iter::once(r.label.to_lowercase())
                        .chain(r.aliases.iter().map(|a| a.to_lowercase()))
                        .chain(std::iter::once(r.id.replace('_', " ")))
                        .map(move |n| (r.id.as_str(), n))
                })
                .collect(),
        );
        room.map(|r| Query::new(text, r, None))
            .ok_or_else(|| QueryError::NoTarget(text.to_string()))
    }
}
