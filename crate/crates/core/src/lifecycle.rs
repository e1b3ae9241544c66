//! The help-request state machine and hint rating.

use crate::error::{Error, Result};
use crate::model::{HelpRequest, Hint, LifecycleEvent, Rating, RequestState};

impl RequestState {
    /// The state reached by applying `event`, or `None` when the pair is
    /// not an edge of the lifecycle.
    pub fn after(self, event: LifecycleEvent) -> Option<RequestState> {
        use LifecycleEvent as E;
        use RequestState as S;
        match (self, event) {
            (S::Created, E::StartGeneration) => Some(S::Generating),
            (S::Generating, E::Deliver) => Some(S::Delivered),
            (S::Generating, E::Fail) => Some(S::Failed),
            (S::Delivered, E::RateHelpful) => Some(S::RatedHelpful),
            (S::Delivered, E::RateUnhelpful) => Some(S::RatedUnhelpful),
            (S::RatedUnhelpful, E::Escalate) => Some(S::Escalated),
            (S::Escalated, E::InstructorView) => Some(S::InstructorViewed),
            (S::InstructorViewed, E::Resolve) => Some(S::Resolved),
            _ => None,
        }
    }
}

pub fn apply_transition(request: &HelpRequest, event: LifecycleEvent) -> Result<HelpRequest> {
    let next = request.state.after(event).ok_or(Error::IllegalTransition {
        from: request.state,
        event,
    })?;
    Ok(HelpRequest {
        state: next,
        ..request.clone()
    })
}

/// Records a one-shot rating and moves the owning request forward.
pub fn rate_hint(
    hint: &Hint,
    request: &HelpRequest,
    rating: Rating,
) -> Result<(Hint, HelpRequest)> {
    if hint.rating.is_some() {
        return Err(Error::AlreadyRated);
    }
    if request.state != RequestState::Delivered {
        return Err(Error::NotDelivered);
    }
    let event = match rating {
        Rating::Helpful => LifecycleEvent::RateHelpful,
        Rating::Unhelpful => LifecycleEvent::RateUnhelpful,
    };
    let request = apply_transition(request, event)?;
    let hint = Hint {
        rating: Some(rating),
        ..hint.clone()
    };
    Ok((hint, request))
}
