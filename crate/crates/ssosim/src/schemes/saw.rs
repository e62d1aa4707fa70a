//! SAW driver (e-mail based authentication, plus the notification-augmented
//! variant).
//!
//! The SP proves the user controls their mailbox on every login: it mails a
//! one-time string bound to the initiating browser session, and the user
//! echoes the pair back. The SP acts as its own bridge to the e-mail
//! namespace; validity of a login inherently depends on the mail provider
//! cooperating at authentication time.
//!
//! The augmented variant has the SP remember browsers it has seen (a cookie)
//! and notify the user over an out-of-band channel whenever a login arrives
//! from an unknown one — turning silent third-party impersonation into a
//! detectable event.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct Saw {
    pub augmented: bool,
}

fn email(user: &PrincipalId, provider: &PrincipalId) -> Term {
    Term::atom(format!("{user}@{provider}"))
}

impl SchemeDriver for Saw {
    fn name(&self) -> SchemeName {
        if self.augmented {
            SchemeName::SawAugmented
        } else {
            SchemeName::Saw
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A4,
                conveyance: Conveyance::G3,
                verification: Verification::C1,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one provider and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        for i in 1..=cfg.idps {
            dep.mails.push(w.add_principal(&format!("mail{i}"), Role::MailProvider, None));
        }
        dep.home_idp = dep.mails[0].clone();

        let user = dep.user.clone();
        let mail = dep.home_idp.clone();
        let pw = w.weak_secret(&user, &format!("mailpw.{user}.{mail}"));
        w.put(&mail, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
        w.put(&user, "mail-password", pw, Scope::User(user.clone()));
        let addr = email(&user, &mail);
        w.make_public(addr.clone());

        for sp in dep.sps.clone() {
            w.put(&sp, &format!("account:{user}"), addr.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, addr.clone());
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new() // any domain owner exchanges mail with any other
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new())
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let mail = run.dep.home_idp.clone();
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == mail.as_str())
        {
            // SPs filter by e-mail domain.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }
        let addr = email(user, &mail);
        let augmented = self.augmented;
        let known_device = run
            .world
            .store_term(sp, &format!("known-device:{user}:{device}"))
            .is_some();

        let result = || -> Result<(), crate::world::WorldError> {
            let w = &mut run.world;
            w.send(Channel::web(user, device), addr.clone(), Annotation::UserAction)?;
            w.send(Channel::web(device, sp), addr.clone(), Annotation::None)?;

            // One-time string bound to this browser session, delivered into
            // the user's mailbox. The SP cannot validate anyone without the
            // provider's cooperation right now.
            let sp_string = w.nonce(&sp.clone(), "spstring");
            let browser_string = w.nonce(&device.clone(), "browserstring");
            w.send(Channel::web(device, sp), browser_string.clone(), Annotation::None)?;
            w.send(
                Channel::email(sp, &mail),
                Term::list(&[Term::atom("login-link"), Term::atom(sp.as_str()), sp_string.clone()]),
                Annotation::IdPQueried,
            )?;
            w.put(
                &mail,
                &format!("mailbox:{user}:{}", sp_string.clone()),
                sp_string.clone(),
                Scope::User(user.clone()),
            );
            // The user opens their mailbox and clicks the link.
            w.send(Channel::web(&mail, device), sp_string.clone(), Annotation::OobVerification)?;
            w.send(Channel::web(user, device), Term::atom("click-link"), Annotation::UserAction)?;
            w.send(
                Channel::web(device, sp),
                Term::pair(sp_string, browser_string),
                Annotation::None,
            )?;
            Ok(())
        }();
        if result.is_err() {
            return AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start));
        }

        if augmented {
            run.world.put(
                sp,
                &format!("known-device:{user}:{device}"),
                Term::atom(device.as_str()),
                Scope::User(user.clone()),
            );
            if !known_device {
                // First contact from this browser: tell the user out of band,
                // independently of the (possibly hostile) mail path.
                let _ = run.world.send(
                    Channel::sms(sp, user),
                    Term::pair(Term::atom("new-device-login"), Term::atom(sp.as_str())),
                    Annotation::UserNotification,
                );
            }
        }

        run.world
            .put(sp, &format!("accepted:{user}"), addr.clone(), Scope::User(user.clone()));
        let session = create_session(&mut run.world, sp, user, addr, device);
        AuthOutcome::success(session, run.trace_from(start))
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.mails.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second mail provider".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let old = run.dep.home_idp.clone();
        let new_mail = run.dep.mails[1].clone();

        let pw = run.world.weak_secret(&user, &format!("mailpw.{user}.{new_mail}"));
        run.world.put(
            &new_mail,
            &format!("pwhash:{user}"),
            Term::hash(pw.clone()),
            Scope::User(user.clone()),
        );
        run.world.put(&user, "mail-password", pw, Scope::User(user.clone()));
        let new_addr = email(&user, &new_mail);
        run.world.make_public(new_addr.clone());

        // Interim forwarding keeps old-address logins alive while every SP
        // account is updated one by one.
        let _ = run.world.send(
            Channel::email(&old, &new_mail),
            Term::pair(Term::atom("forwarding-enabled"), new_addr.clone()),
            Annotation::None,
        );
        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), new_addr.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), new_addr.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), new_addr.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, new_addr.clone());
            updates += 1;
        }
        run.dep.home_idp = new_mail;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: true,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let mail = run.dep.home_idp.clone();
        let mail_pw = run
            .world
            .store_term(victim, "mail-password")
            .cloned()
            .expect("deployed");
        // A fresh one-time string lands in the victim's mailbox for whoever
        // initiates a login; reading it takes the mailbox password (or the
        // provider itself).
        let otp = Term::Nonce(SecretId::new("atk.spstring"));
        let emits = if self.augmented {
            // The attacker's browser is unknown to the SP, so completing the
            // login necessarily pings the victim out of band.
            vec![Annotation::UserNotification]
        } else {
            vec![]
        };
        AcceptanceSpec {
            routes: vec![Route {
                label: "echo a fresh mailed one-time string",
                requires: vec![Requirement::Oracle("read-mailbox")],
                emits,
            }],
            oracles: vec![Oracle {
                id: "read-mailbox",
                issuer: mail,
                needs: vec![mail_pw],
                yields: vec![otp.clone()],
                emits: vec![],
            }],
            attacker_seed: vec![],
            fresh_classes: vec![(otp, SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn login_round_trips_through_the_mail_provider() {
        let drv = Saw { augmented: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert!(out
            .trace
            .iter()
            .any(|e| e.channel.kind == crate::world::ChannelKind::Email));
        assert_eq!(Run::count_annotation(&out.trace, Annotation::IdPQueried), 1);
    }

    #[test]
    fn mail_outage_blocks_login() {
        let drv = Saw { augmented: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let mail = r.dep.home_idp.clone();
        r.world.inject(crate::world::Fault::Outage(mail)).unwrap();
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert_eq!(out.failure, Some(FailureReason::OutagePath));
    }

    #[test]
    fn switch_forwards_and_updates_each_sp() {
        let drv = Saw { augmented: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let out = drv.switch_idp(&mut r).unwrap();
        assert!(out.interim_forwarding);
        assert_eq!(out.per_sp_updates, 2);
    }

    #[test]
    fn augmented_notifies_on_first_device_login_only() {
        let drv = Saw { augmented: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let first = drv.authenticate(&mut r, &user, &sp, &dev);
        assert_eq!(Run::count_annotation(&first.trace, Annotation::UserNotification), 1);
        let second = drv.authenticate(&mut r, &user, &sp, &dev);
        assert_eq!(Run::count_annotation(&second.trace, Annotation::UserNotification), 0);
    }
}
