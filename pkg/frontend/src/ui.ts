/** DOM glue for index.html; every flow lives in the library modules. */

import { BrowserSession, Credentials, ProtocolError } from './session.js';
import { createNote, readNote, updateNote } from './notes.js';
import { composeEmail, fetchInbox } from './email.js';
import { attrWidth, respond, results, surveyInfo, Schema } from './survey.js';

let session: BrowserSession | null = null;
let loadedSchema: Schema | null = null;

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function status(text: string, isError = false): void {
	const el = $('status');
	el.textContent = text;
	el.className = isError ? 'error' : '';
}

function show(id: string): void {
	$(id).classList.remove('hidden');
}

async function guard(work: () => Promise<void>): Promise<void> {
	try {
		await work();
	} catch (err) {
		status(err instanceof ProtocolError ? err.message : String(err), true);
	}
}

$('connect').onclick = () =>
	guard(async () => {
		const creds = JSON.parse(($('creds') as HTMLTextAreaElement).value) as Credentials;
		session = await BrowserSession.open(creds);
		status(`connected as u:${creds.user} (5 authenticated channels)`);
		for (const id of ['notes', 'mail', 'survey']) show(id);
	});

$('note-create').onclick = () =>
	guard(async () => {
		const threshold = Number(($('note-threshold') as HTMLSelectElement).value);
		const noteId = await createNote(session!, ($('note-text') as HTMLTextAreaElement).value, threshold);
		($('note-id') as HTMLInputElement).value = noteId;
		$('note-out').textContent = `created ${noteId}`;
	});

$('note-read').onclick = () =>
	guard(async () => {
		$('note-out').textContent = await readNote(session!, ($('note-id') as HTMLInputElement).value);
	});

$('note-update').onclick = () =>
	guard(async () => {
		await updateNote(session!, ($('note-id') as HTMLInputElement).value, ($('note-text') as HTMLTextAreaElement).value);
		$('note-out').textContent = 'updated';
	});

$('mail-send').onclick = () =>
	guard(async () => {
		const id = await composeEmail(session!, ($('mail-to') as HTMLInputElement).value, ($('mail-body') as HTMLTextAreaElement).value);
		status(`sent ${id}`);
	});

$('mail-fetch').onclick = () =>
	guard(async () => {
		const inbox = $('inbox');
		inbox.replaceChildren();
		for (const message of await fetchInbox(session!)) {
			const li = document.createElement('li');
			li.textContent = `${message.sender}: ${message.body}`;
			inbox.appendChild(li);
		}
	});

$('survey-load').onclick = () =>
	guard(async () => {
		const info = await surveyInfo(session!, ($('survey-id') as HTMLInputElement).value);
		loadedSchema = info.schema;
		const form = $('survey-form') as HTMLFormElement;
		form.replaceChildren();
		for (const attr of Object.keys(info.schema).sort()) {
			const label = document.createElement('label');
			const width = attrWidth(info.schema, attr);
			label.textContent = `${attr} (${info.schema[attr].type === 'bool' ? 'yes=1/no=0' : `0..${(1 << width) - 1}`}) `;
			const input = document.createElement('input');
			input.type = 'number';
			input.name = attr;
			input.min = '0';
			input.max = String((1 << width) - 1);
			input.required = true;
			label.appendChild(input);
			form.appendChild(label);
			form.appendChild(document.createElement('br'));
		}
		show('survey-submit');
	});

$('survey-submit').onclick = () =>
	guard(async () => {
		const form = $('survey-form') as HTMLFormElement;
		const answers: Record<string, number> = {};
		for (const attr of Object.keys(loadedSchema!)) {
			answers[attr] = Number((form.elements.namedItem(attr) as HTMLInputElement).value);
		}
		await respond(session!, ($('survey-id') as HTMLInputElement).value, answers);
		status('response accepted (consistency check passed at all nodes)');
	});

$('survey-results').onclick = () =>
	guard(async () => {
		const list = $('results');
		list.replaceChildren();
		for (const r of await results(session!, ($('survey-id') as HTMLInputElement).value)) {
			const li = document.createElement('li');
			li.textContent =
				`${r.query_id}: count=${r.numerator}` +
				(r.percentage !== undefined ? ` of ${r.denominator} (${r.percentage}%)` : '') +
				` over ${r.respondents} respondents`;
			list.appendChild(li);
		}
	});
