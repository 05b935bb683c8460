import { App } from './app.js';
import { ServiceClient } from './api.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app container');
}
new App(root, new ServiceClient('')).mount();
